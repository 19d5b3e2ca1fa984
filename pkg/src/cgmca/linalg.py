"""SVD and PSD factorization utilities with deterministic conventions.

LAPACK leaves two ambiguities in an SVD: the sign of each singular-vector
pair, and the choice of basis completing the thin factors to square
orthogonal matrices.  Every routine here resolves both deterministically
(largest-magnitude entry of each left vector made positive; completions
built by QR against identity columns with a fixed sign rule), so repeated
factorizations of the same matrix are bit-identical and downstream
closed-form solutions are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPsdError

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class ThinSvd:
    """Rank-truncated SVD: only singular values above the rank threshold kept."""

    u: np.ndarray      # (rows, r), orthonormal columns
    sigma: np.ndarray  # (r,), positive, non-increasing
    v: np.ndarray      # (cols, r), orthonormal columns
    r: int

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class FullSvd:
    """Square-factor SVD; trailing singular values below the rank threshold are zeroed."""

    u_bar: np.ndarray      # (rows, rows), orthogonal
    sigma_bar: np.ndarray  # (min(rows, cols),), non-negative, non-increasing
    v_bar: np.ndarray      # (cols, cols), orthogonal


@dataclass(frozen=True)
class PsdFactor:
    """Eigenfactorization of a PSD matrix, keeping only eigenvalues above the rank threshold.

    ``sigma_c`` holds square roots of the retained eigenvalues, i.e. the
    singular values of any factor F with F F^T equal to the input.
    """

    u_c: np.ndarray      # (k, r_cov), orthonormal columns
    sigma_c: np.ndarray  # (r_cov,), positive, non-increasing
    r_cov: int

    def reconstruct(self) -> np.ndarray:
        return (self.u_c * self.sigma_c**2) @ self.u_c.T


def _validated(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _check_tol(tol: float) -> None:
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")


def numeric_rank(sigma: np.ndarray, rows: int, cols: int, tol: float) -> int:
    """Count singular values above ``tol * sigma_max * max(rows, cols)``."""
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0] * max(rows, cols)))


def _fix_svd_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Largest-magnitude entry of each left vector made positive, right vector
    # flipped to match, so the product is unchanged.
    for j in range(u.shape[1]):
        col = u[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return u, v


def thin_svd(m, tol: float = DEFAULT_TOL) -> ThinSvd:
    """Sign-normalized thin SVD keeping singular values above the rank threshold.

    Parameters
    ----------
    m : (rows, cols) array_like
        Finite-valued matrix.
    tol : float
        Relative rank tolerance in (0, 1); a singular value counts toward the
        rank when it exceeds ``tol * sigma_max * max(rows, cols)``.

    Returns
    -------
    ThinSvd
        Factors with ``r`` columns; all factors are empty when every singular
        value falls below the threshold.
    """
    m = _validated(m)
    _check_tol(tol)
    rows, cols = m.shape
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    r = numeric_rank(s, rows, cols, tol)
    u, v = _fix_svd_signs(u[:, :r].copy(), vt[:r].T.copy())
    return ThinSvd(u=u, sigma=s[:r].copy(), v=v, r=r)


def _complete_orthonormal(u: np.ndarray, n: int) -> np.ndarray:
    """Extend orthonormal columns ``u`` to an n-by-n orthogonal matrix.

    QR of ``[u | I_n]`` supplies the completion; the leading columns of the
    result are ``u`` itself (not the QR copy), and each completion column has
    its first nonzero entry made positive for reproducibility.
    """
    r = u.shape[1]
    if r == n:
        return u.copy()
    q, _ = np.linalg.qr(np.hstack([u, np.eye(n)]))
    comp = q[:, r:n].copy()
    for j in range(comp.shape[1]):
        col = comp[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)[0]
        if col[lead] < 0.0:
            comp[:, j] = -col
    return np.hstack([u, comp])


def full_svd(m, tol: float = DEFAULT_TOL) -> FullSvd:
    """Thin SVD embedded in square orthogonal factors via deterministic completion.

    The leading columns of ``u_bar`` / ``v_bar`` are exactly the thin factors;
    singular values at or below the rank threshold are zeroed in ``sigma_bar``,
    so the reconstruction is the rank-``r`` truncation of the input.
    """
    m = _validated(m)
    _check_tol(tol)
    rows, cols = m.shape
    thin = thin_svd(m, tol)
    u_bar = _complete_orthonormal(thin.u, rows)
    v_bar = _complete_orthonormal(thin.v, cols)
    sigma_bar = np.zeros(min(rows, cols))
    sigma_bar[: thin.r] = thin.sigma
    return FullSvd(u_bar=u_bar, sigma_bar=sigma_bar, v_bar=v_bar)


def psd_factor(cc, tol: float = DEFAULT_TOL) -> PsdFactor:
    """Factor a symmetric PSD matrix into orthonormal eigenvectors and singular values.

    Parameters
    ----------
    cc : (k, k) array_like
        Symmetric (to 1e-8 relative Frobenius) positive semidefinite matrix.
        Eigenvalues in ``[-tol * lambda_max, 0)`` are treated as rounding noise
        and clamped to zero.
    tol : float
        Relative tolerance controlling both the negativity check and the
        retained numeric rank (eigenvalue > ``tol * lambda_max * k``).

    Raises
    ------
    NotPsdError
        If ``cc`` is asymmetric beyond tolerance or has an eigenvalue below
        ``-tol * lambda_max``.
    """
    cc = _validated(cc, "psd matrix")
    _check_tol(tol)
    if cc.shape[0] != cc.shape[1]:
        raise ValueError(f"psd matrix must be square, got shape {cc.shape}")
    k = cc.shape[0]
    scale = float(np.linalg.norm(cc))
    if scale > 0.0 and float(np.linalg.norm(cc - cc.T)) > 1e-8 * scale:
        raise NotPsdError("matrix is asymmetric beyond 1e-8 relative tolerance")
    w, q = np.linalg.eigh(0.5 * (cc + cc.T))
    # stable descending sort keeps the backend's order within tied eigenvalues,
    # so e.g. the identity matrix factors to the identity basis
    order = np.argsort(-w, kind="stable")
    w = w[order]
    q = q[:, order].copy()
    lam_scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[-1] < -tol * lam_scale:
        raise NotPsdError(
            f"matrix has negative eigenvalue {w[-1]:.3e} below -tol*lambda_max"
        )
    np.clip(w, 0.0, None, out=w)
    r_cov = 0
    if w.size and w[0] > 0.0:
        r_cov = int(np.count_nonzero(w > tol * w[0] * k))
    u_c = q[:, :r_cov].copy()
    for j in range(r_cov):
        col = u_c[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            u_c[:, j] = -col
    return PsdFactor(u_c=u_c, sigma_c=np.sqrt(w[:r_cov]), r_cov=r_cov)


def diag_embed(v, rows: int, cols: int) -> np.ndarray:
    """Place vector ``v`` on the leading diagonal of a rows-by-cols zero matrix."""
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if v.ndim != 1:
        raise ValueError(f"v must be 1-D, got shape {v.shape}")
    c = v.shape[0]
    if c > min(rows, cols):
        raise ValueError(f"vector length {c} exceeds min(rows, cols) = {min(rows, cols)}")
    out = np.zeros((rows, cols))
    out[np.arange(c), np.arange(c)] = v
    return out
