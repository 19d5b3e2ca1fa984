"""Least-squares recovery of source-domain preimages from common-domain points.

Given a trained map g(x) = a @ x + b and a target point in the common
domain, ``invert_map`` finds the x minimizing ``||a @ x + b - target||_2``
with an iterative Krylov solver (LSQR bidiagonalization) driven through a
matrix-operator interface, so the normal equations are never materialized;
for rank-deficient maps the minimum-norm least-squares solution is
returned.  ``recover_preimage`` composes this with a second map: it pushes
an observation from the other domain into the common domain and pulls it
back through the first map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .train import AffineMap, apply_map

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8

# istop codes denoting a met residual criterion (0/1/4: compatible system,
# 2/5: least-squares criterion); 7 is the iteration cap, 3/6 condition caps.
_CONVERGED_ISTOP = (0, 1, 2, 4, 5)


@dataclass(frozen=True)
class InversionResult:
    x_hat: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def invert_map(
    map_: AffineMap,
    target,
    max_iter: int | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> InversionResult:
    """Minimize ``||a @ x + b - target||_2`` over unconstrained x.

    Parameters
    ----------
    map_ : AffineMap
        Map to invert.
    target : (target_dim,) array_like
        Common-domain point.
    max_iter : int, optional
        Iteration cap; defaults to ``4 * max(source_dim, target_dim)``.
        Exhausting it is not an error: the best iterate is returned with
        ``converged=False``.
    rtol, atol : float
        Relative residual tolerance (against the centered target norm) and
        least-squares gradient tolerance of the Krylov solver.  The solver's
        condition-number cutoff is disabled so ill-conditioned maps iterate
        until a residual criterion or the cap is hit.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (map_.target_dim,):
        raise ValueError(
            f"target has shape {target.shape}, expected ({map_.target_dim},)"
        )
    k, d = map_.target_dim, map_.source_dim
    if max_iter is None:
        max_iter = 4 * max(d, k)
    a = map_.a
    op = LinearOperator(
        (k, d), matvec=lambda v: a @ v, rmatvec=lambda u: a.T @ u, dtype=np.float64
    )
    rhs = target - map_.b
    x, istop, itn = lsqr(
        op, rhs, atol=atol, btol=rtol, conlim=0.0, iter_lim=max_iter
    )[:3]
    residual = float(np.linalg.norm(a @ x + map_.b - target))
    return InversionResult(
        x_hat=x,
        residual_norm=residual,
        iterations=int(itn),
        converged=istop in _CONVERGED_ISTOP,
    )


def recover_preimage(
    map_src: AffineMap,
    map_other: AffineMap,
    observed,
    max_iter: int | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> InversionResult:
    """Recover a source-domain point whose image best matches an observation's image.

    The observation from the other domain is mapped into the common domain,
    then pulled back through ``map_src`` by least squares.
    """
    observed = np.asarray(observed, dtype=np.float64)
    if observed.shape != (map_other.source_dim,):
        raise ValueError(
            f"observed has shape {observed.shape}, expected ({map_other.source_dim},)"
        )
    target = apply_map(map_other, observed)
    return invert_map(map_src, target, max_iter=max_iter, rtol=rtol, atol=atol)
