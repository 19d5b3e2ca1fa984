"""Closed-form training of covariance-constrained matching maps.

Two data sets of matched samples (column j of each set observed jointly)
are mapped into a common k-dimensional domain by affine maps
``g_i(x) = A_i x + b_i`` minimizing the mean squared distance between
matched pairs, subject to the mapped data being centered and exhibiting a
prescribed second moment ``C_i C_i^T``.  The minimizer is computed in
closed form: a change of variables reduces the problem to maximizing a
trace over pairs of semi-orthogonal matrices, whose optimum is a product
of singular-value spectra, attained by combining the full SVDs of two
small coupling matrices.  MCA is the special case of an identity
prescribed covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError
from .linalg import (
    DEFAULT_TOL,
    PsdFactor,
    ThinSvd,
    full_svd,
    numeric_rank,
    psd_factor,
    thin_svd,
)


@dataclass(frozen=True)
class DataSet:
    """A d-by-n matrix of n matched realizations, one sample per column."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {x.shape}")
        if x.shape[0] <= 1 or x.shape[1] <= 1:
            raise ValueError(
                f"data needs dimension > 1 and more than one sample, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("data contains non-finite entries")
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SampleStats:
    """Sample mean, scaled-centered data matrix and its thin SVD.

    Column j of ``s`` is ``(x_j - mu) / sqrt(n - 1)``, so ``s @ s.T`` is the
    unbiased sample covariance and ``r`` is its numeric rank.
    """

    mu: np.ndarray  # (d,)
    s: np.ndarray   # (d, n)
    svd: ThinSvd
    r: int

    @property
    def d(self) -> int:
        return self.s.shape[0]

    @property
    def n(self) -> int:
        return self.s.shape[1]


@dataclass(frozen=True)
class PrescribedCovariance:
    """Target second moment for mapped data: a k-by-k PSD matrix and its factorization."""

    cc: np.ndarray
    k: int
    factor: PsdFactor

    @property
    def r_cov(self) -> int:
        return self.factor.r_cov

    @classmethod
    def from_matrix(cls, cc, tol: float = DEFAULT_TOL) -> "PrescribedCovariance":
        cc = np.asarray(cc, dtype=np.float64)
        factor = psd_factor(cc, tol)
        return cls(cc=cc, k=cc.shape[0], factor=factor)

    @classmethod
    def identity(cls, k: int, tol: float = DEFAULT_TOL) -> "PrescribedCovariance":
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        return cls.from_matrix(np.eye(k), tol)


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Outcome of the rank test: a covariance of rank r_cov needs data of rank >= r_cov."""

    feasible: bool
    data_rank: int
    cov_rank: int


@dataclass(frozen=True)
class TraceSolution:
    """Closed-form maximizer of the matching trace and the value it attains.

    ``d1_opt`` / ``d2_opt`` are the optimal semi-orthogonal factors
    (``d_i @ d_i.T = I``); ``achieved_trace`` is the sum of the leading
    ``r_minus`` products of singular values of the coupling matrices ``a``
    and ``b``.
    """

    a: np.ndarray       # (r_cov_1, r_cov_2)
    b: np.ndarray       # (r_1, r_2)
    d1_opt: np.ndarray  # (r_cov_1, r_1)
    d2_opt: np.ndarray  # (r_cov_2, r_2)
    r_minus: int
    achieved_trace: float


@dataclass(frozen=True)
class AffineMap:
    """Trained map x -> a @ x + b from a d-dimensional domain into the common domain."""

    a: np.ndarray  # (target_dim, source_dim)
    b: np.ndarray  # (target_dim,)
    source_dim: int
    target_dim: int

    def __post_init__(self):
        if self.a.shape != (self.target_dim, self.source_dim):
            raise ValueError(
                f"linear part has shape {self.a.shape}, expected "
                f"({self.target_dim}, {self.source_dim})"
            )
        if self.b.shape != (self.target_dim,):
            raise ValueError(
                f"translation has shape {self.b.shape}, expected ({self.target_dim},)"
            )


def sample_stats(data: DataSet, tol: float = DEFAULT_TOL) -> SampleStats:
    """Compute the sample mean, the scaled-centered matrix and its thin SVD.

    The mean is computed in shifted form (about the first sample) so that
    zero-variance data centers to exactly zero and is detected as rank 0.
    """
    x = data.x
    n = data.n
    dx = x - x[:, :1]
    dm = dx.mean(axis=1)
    mu = x[:, 0] + dm
    s = (dx - dm[:, None]) / math.sqrt(n - 1)
    svd = thin_svd(s, tol)
    return SampleStats(mu=mu, s=s, svd=svd, r=svd.r)


def check_feasibility(stats: SampleStats, cov: PrescribedCovariance) -> FeasibilityVerdict:
    """A prescribed covariance is achievable iff its rank is at most the data rank."""
    return FeasibilityVerdict(
        feasible=stats.r >= cov.r_cov, data_rank=stats.r, cov_rank=cov.r_cov
    )


def _raise_infeasible(domain: int, verdict: FeasibilityVerdict) -> None:
    if verdict.data_rank == 0:
        raise FeasibilityError(
            f"problem infeasible: domain {domain} data has zero variance (rank 0) "
            f"but the prescribed covariance has rank {verdict.cov_rank}"
        )
    raise FeasibilityError(
        f"problem infeasible: domain {domain} data rank {verdict.data_rank} is "
        f"below the prescribed covariance rank {verdict.cov_rank}"
    )


def solve_trace(
    stats1: SampleStats,
    stats2: SampleStats,
    cov1: PrescribedCovariance,
    cov2: PrescribedCovariance,
    tol: float = DEFAULT_TOL,
) -> TraceSolution:
    """Maximize the matching trace over pairs of semi-orthogonal factors.

    Builds the coupling matrices
    ``a = diag(sigma_c1) @ u_c1.T @ u_c2 @ diag(sigma_c2)`` and
    ``b = v_s1.T @ v_s2``, then combines their full SVDs: the optimal pair is
    ``d1 = u_bar(a) @ u_bar(b)[:, :r_cov_1].T`` and
    ``d2 = v_bar(a) @ v_bar(b)[:, :r_cov_2].T``, attaining
    ``sum_j sigma_j(a) * sigma_j(b)`` over the leading
    ``r_minus = min(rank a, rank b)`` terms.
    """
    for domain, (stats, cov) in enumerate(((stats1, cov1), (stats2, cov2)), start=1):
        verdict = check_feasibility(stats, cov)
        if not verdict.feasible:
            _raise_infeasible(domain, verdict)
    f1, f2 = cov1.factor, cov2.factor
    a = (f1.sigma_c[:, None] * (f1.u_c.T @ f2.u_c)) * f2.sigma_c[None, :]
    b = stats1.svd.v.T @ stats2.svd.v
    fa = full_svd(a, tol)
    fb = full_svd(b, tol)
    rc1, rc2 = f1.r_cov, f2.r_cov
    d1 = fa.u_bar @ fb.u_bar[:, :rc1].T
    d2 = fa.v_bar @ fb.v_bar[:, :rc2].T
    if d1.shape != (rc1, stats1.r) or d2.shape != (rc2, stats2.r):
        raise AssertionError(
            f"optimal factor shapes {d1.shape}, {d2.shape} do not match "
            f"({rc1}, {stats1.r}), ({rc2}, {stats2.r})"
        )
    rank_a = numeric_rank(fa.sigma_bar, a.shape[0], a.shape[1], tol)
    rank_b = numeric_rank(fb.sigma_bar, b.shape[0], b.shape[1], tol)
    r_minus = min(rank_a, rank_b)
    achieved = float(fa.sigma_bar[:r_minus] @ fb.sigma_bar[:r_minus])
    return TraceSolution(
        a=a, b=b, d1_opt=d1, d2_opt=d2, r_minus=r_minus, achieved_trace=achieved
    )


def build_maps(
    stats_i: SampleStats, cov_i: PrescribedCovariance, d_opt_i: np.ndarray
) -> AffineMap:
    """Assemble the affine map from one domain's statistics and its optimal factor.

    The linear part is
    ``u_c @ diag(sigma_c) @ d_opt @ diag(1 / sigma_s) @ u_s.T`` (the inverse
    acts on the thin, rank-r diagonal factor, which is invertible by
    construction) and the translation centers the training mean.
    """
    f = cov_i.factor
    d_opt_i = np.asarray(d_opt_i, dtype=np.float64)
    if d_opt_i.shape != (f.r_cov, stats_i.r):
        raise ValueError(
            f"optimal factor has shape {d_opt_i.shape}, expected ({f.r_cov}, {stats_i.r})"
        )
    core = (f.sigma_c[:, None] * d_opt_i) / stats_i.svd.sigma[None, :]
    a = f.u_c @ core @ stats_i.svd.u.T
    b = -a @ stats_i.mu
    return AffineMap(a=a, b=b, source_dim=stats_i.d, target_dim=cov_i.k)


def train_cgmca_from_stats(
    stats1: SampleStats,
    stats2: SampleStats,
    cov1: PrescribedCovariance,
    cov2: PrescribedCovariance,
    tol: float = DEFAULT_TOL,
) -> tuple[AffineMap, AffineMap, TraceSolution, float]:
    """Training entry point for callers that already hold sample statistics.

    Returns both maps, the trace solution, and the attained objective value
    ``(n - 1) / n * ||A_1 S_1 - A_2 S_2||_F^2`` computed directly from the
    mapped scaled-centered data.
    """
    n = stats1.n
    if stats2.n != n:
        raise ValueError(
            f"matched data required: domain sample counts differ ({n} vs {stats2.n})"
        )
    sol = solve_trace(stats1, stats2, cov1, cov2, tol)
    map1 = build_maps(stats1, cov1, sol.d1_opt)
    map2 = build_maps(stats2, cov2, sol.d2_opt)
    diff = map1.a @ stats1.s - map2.a @ stats2.s
    objective = (n - 1) / n * float(np.sum(diff * diff))
    return map1, map2, sol, objective


def train_cgmca(
    data1: DataSet,
    data2: DataSet,
    cov1: PrescribedCovariance,
    cov2: PrescribedCovariance,
    tol: float = DEFAULT_TOL,
) -> tuple[AffineMap, AffineMap, TraceSolution, float]:
    """Train both covariance-constrained maps from matched data sets.

    Raises
    ------
    ValueError
        If the two data sets have different sample counts.
    FeasibilityError
        If either domain's data rank is below its prescribed covariance rank;
        the message names the failing domain.  Raised before any map is built.
    """
    if data1.n != data2.n:
        raise ValueError(
            f"matched data required: domain sample counts differ ({data1.n} vs {data2.n})"
        )
    stats1 = sample_stats(data1, tol)
    stats2 = sample_stats(data2, tol)
    return train_cgmca_from_stats(stats1, stats2, cov1, cov2, tol)


def train_mca(
    data1: DataSet, data2: DataSet, k: int, tol: float = DEFAULT_TOL
) -> tuple[AffineMap, AffineMap]:
    """Train identity-covariance (MCA) maps into a k-dimensional common domain.

    Convenience wrapper over the same code path as covariance-generalized
    training with ``C_i C_i^T = I_k``; requires ``k <= min(r_1, r_2)``.
    """
    cov = PrescribedCovariance.identity(k, tol)
    map1, map2, _, _ = train_cgmca(data1, data2, cov, cov, tol)
    return map1, map2


def apply_map(map_: AffineMap, points) -> np.ndarray:
    """Apply ``x -> a @ x + b`` columnwise; accepts a single vector or a d-by-m batch."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] != map_.source_dim:
        raise ValueError(
            f"points have shape {np.asarray(points).shape}, expected leading "
            f"dimension {map_.source_dim}"
        )
    out = map_.a @ pts + map_.b[:, None]
    return out[:, 0] if single else out
