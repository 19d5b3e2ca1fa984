"""Image-evaluation apparatus: IDX ingestion, corruption, filtering, scoring.

Images are handled as 784-vectors (column-major flattening of 28x28 pixel
grids, values in [0, 1]) matching the training pipeline's column-per-sample
layout, with helpers to move between vector and grid form.  The corruption
model is additive Gaussian noise, deliberately not clipped to [0, 1]: the
corrupted values feed moment estimation, where clipping would bias means
and covariances.  Recovered images are cleaned by an adaptive local
denoiser followed by a median filter and an affine rescale to [0, 1], then
scored against ground truth with a Gaussian-windowed structural-similarity
index.
"""

from __future__ import annotations

import gzip
import logging
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import FeasibilityError, IdxFormatError
from .linalg import DEFAULT_TOL, PsdFactor
from .train import DataSet, PrescribedCovariance, SampleStats, sample_stats

logger = logging.getLogger(__name__)

IMAGE_SIDE = 28
IMAGE_DIM = IMAGE_SIDE * IMAGE_SIDE

_IMAGES_MAGIC = 0x00000803
_LABELS_MAGIC = 0x00000801

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW_SIDE = 11
SSIM_WINDOW_SIGMA = 1.5


@dataclass(frozen=True)
class ImageSet:
    """Vectorized images (one column each, values in [0, 1]-ish) with digit labels."""

    pixels: np.ndarray  # (784, N)
    labels: np.ndarray  # (N,), values 0..9

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if pixels.ndim != 2 or pixels.shape[0] != IMAGE_DIM:
            raise ValueError(f"pixels must be ({IMAGE_DIM}, N), got {pixels.shape}")
        if labels.shape != (pixels.shape[1],):
            raise ValueError(
                f"labels shape {labels.shape} does not match image count {pixels.shape[1]}"
            )
        if not np.all(np.isfinite(pixels)):
            raise ValueError("pixels contain non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ValueError("labels must lie in 0..9")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class DigitSplit:
    """Disjoint train/test partition of one digit's indices (train share rounded)."""

    digit: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int


@dataclass(frozen=True)
class SsimParams:
    k1: float
    k2: float
    window: str
    dynamic_range: float


@dataclass(frozen=True)
class SsimScore:
    value: float
    params: SsimParams


def vec_to_image(v) -> np.ndarray:
    """Unflatten a 784-vector to its 28x28 pixel grid (column-major layout)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (IMAGE_DIM,):
        raise ValueError(f"expected a ({IMAGE_DIM},) vector, got {v.shape}")
    return v.reshape(IMAGE_SIDE, IMAGE_SIDE, order="F")


def image_to_vec(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError(f"expected a {IMAGE_SIDE}x{IMAGE_SIDE} image, got {img.shape}")
    return img.reshape(IMAGE_DIM, order="F")


def _open_maybe_gzip(path):
    f = open(path, "rb")
    magic = f.read(2)
    f.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=f)
    return f


def _read_exact(f, count: int, path, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"{path}: truncated file, expected {count} bytes for {what}, got {len(data)}"
        )
    return data


def read_idx(images_path, labels_path) -> ImageSet:
    """Parse big-endian IDX image/label containers (raw or gzip) into an ImageSet.

    Pixel bytes are scaled to [0, 1] by division by 255; each 28x28 image is
    flattened column-major into one column of the result.
    """
    with _open_maybe_gzip(images_path) as f:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, images_path, "image header")
        )
        if magic != _IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{_IMAGES_MAGIC:08x}"
            )
        if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
            raise IdxFormatError(
                f"{images_path}: unsupported image size {rows}x{cols}, "
                f"expected {IMAGE_SIDE}x{IMAGE_SIDE}"
            )
        raw = _read_exact(f, count * rows * cols, images_path, f"{count} images")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)
    with _open_maybe_gzip(labels_path) as f:
        magic, label_count = struct.unpack(
            ">II", _read_exact(f, 8, labels_path, "label header")
        )
        if magic != _LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad label magic 0x{magic:08x}, expected 0x{_LABELS_MAGIC:08x}"
            )
        if label_count != count:
            raise IdxFormatError(
                f"label count {label_count} in {labels_path} does not match "
                f"image count {count} in {images_path}"
            )
        labels = np.frombuffer(
            _read_exact(f, label_count, labels_path, f"{label_count} labels"),
            dtype=np.uint8,
        )
    pixels = (images / 255.0).transpose(2, 1, 0).reshape(IMAGE_DIM, count)
    return ImageSet(pixels=pixels, labels=labels.astype(np.int64))


def split_digit(
    images: ImageSet, digit: int, train_ratio: float = 0.8, seed: int = 0
) -> DigitSplit:
    """Seeded uniform train/test partition of one digit's indices.

    The per-digit RNG stream is derived from ``(seed, digit)`` so different
    digits get independent permutations under one experiment seed.  Both
    index sets are returned sorted ascending.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    inds = np.flatnonzero(images.labels == digit)
    rng = np.random.default_rng([seed, digit])
    perm = rng.permutation(inds.size)
    n_train = int(round(train_ratio * inds.size))
    return DigitSplit(
        digit=digit,
        train_idx=np.sort(inds[perm[:n_train]]),
        test_idx=np.sort(inds[perm[n_train:]]),
        seed=seed,
    )


def corrupt(images: ImageSet, sigma: float = 0.1, seed: int = 0) -> ImageSet:
    """Add i.i.d. zero-mean Gaussian pixel noise; values are not clipped."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return ImageSet(pixels=images.pixels.copy(), labels=images.labels.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=images.pixels.shape)
    return ImageSet(pixels=images.pixels + noise, labels=images.labels.copy())


def wiener_denoise(img) -> np.ndarray:
    """Adaptive local denoiser: 3x3 edge-replicated window statistics.

    Output per pixel is ``m + max(v - noise, 0) / max(v, noise) * (x - m)``
    with m, v the local mean/variance and noise the mean of all local
    variances.
    """
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return _kernels.wiener3x3(img)


def median_denoise(img) -> np.ndarray:
    """3x3 median filter with zero-padded borders."""
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return _kernels.median3x3(img)


def rescale01(img) -> np.ndarray:
    """Affinely map min -> 0 and max -> 1; constant images pass through unchanged."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi > lo:
        return (img - lo) / (hi - lo)
    return img.copy()


def filter_pipeline(x) -> np.ndarray:
    """Denoise a recovered 784-vector: adaptive filter, median filter, rescale to [0, 1]."""
    img = vec_to_image(x)
    out = rescale01(median_denoise(wiener_denoise(img)))
    return image_to_vec(out)


@lru_cache(maxsize=8)
def gaussian_window(side: int = SSIM_WINDOW_SIDE, sigma: float = SSIM_WINDOW_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weighting window truncated to side x side."""
    half = (side - 1) // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * sigma**2))
    g /= g.sum()
    g.setflags(write=False)
    return g


def _ssim_window_side(h: int, w: int) -> int:
    side = min(SSIM_WINDOW_SIDE, h, w)
    if side % 2 == 0:
        side -= 1
    if side < 1:
        raise ValueError("image too small for similarity scoring")
    return side


def ssim(x, y, dynamic_range: float = 1.0) -> SsimScore:
    """Structural similarity between two equally sized images.

    Gaussian weighting window (sigma 1.5, 11x11, shrunk to the largest odd
    size fitting smaller images), stabilizers ``(0.01 * L)^2`` and
    ``(0.03 * L)^2``, averaged over all fully interior window positions.
    Symmetric in its arguments, and exactly 1 for identical inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape != y.shape:
        raise ValueError(f"images must be 2-D with equal shapes, got {x.shape} and {y.shape}")
    if dynamic_range <= 0:
        raise ValueError(f"dynamic_range must be > 0, got {dynamic_range}")
    side = _ssim_window_side(*x.shape)
    win = gaussian_window(side, SSIM_WINDOW_SIGMA)
    value = _kernels.ssim_value(x, y, dynamic_range, SSIM_K1, SSIM_K2, win)
    params = SsimParams(
        k1=SSIM_K1,
        k2=SSIM_K2,
        window=f"gaussian sigma={SSIM_WINDOW_SIGMA} {side}x{side} valid",
        dynamic_range=dynamic_range,
    )
    return SsimScore(value=value, params=params)


def rank_t_covariance_from_stats(stats: SampleStats, t: int) -> PrescribedCovariance:
    """Best rank-t approximation of the sample covariance held by ``stats``.

    The covariance is ``s @ s.T``, so its top eigenpairs are the leading left
    singular vectors of ``s`` paired with squared singular values; keeping
    the ``t`` largest is the Frobenius-optimal rank-t PSD approximation.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if t > stats.r:
        raise FeasibilityError(
            f"infeasible rank-{t} covariance target: the training covariance "
            f"has rank {stats.r}, and a prescribed covariance is only "
            f"achievable up to the data rank"
        )
    u_t = stats.svd.u[:, :t].copy()
    sig_t = stats.svd.sigma[:t].copy()
    cc = (u_t * sig_t**2) @ u_t.T
    cc = 0.5 * (cc + cc.T)
    factor = PsdFactor(u_c=u_t, sigma_c=sig_t, r_cov=t)
    return PrescribedCovariance(cc=cc, k=stats.d, factor=factor)


def rank_t_covariance(train: ImageSet, t: int, tol: float = DEFAULT_TOL) -> PrescribedCovariance:
    """Best rank-t approximation of the sample covariance of a training image set."""
    stats = sample_stats(DataSet(train.pixels), tol)
    return rank_t_covariance_from_stats(stats, t)


def write_pgm(path, img) -> None:
    """Write one image as binary 8-bit PGM, clamping values to [0, 255] at write time."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def montage_grid(rows: list[dict[int, np.ndarray]], digits) -> np.ndarray:
    """Assemble row-per-stage, column-per-digit tiles into one image.

    ``rows`` maps digit -> 28x28 tile for each stage; digits missing from any
    row are dropped from all rows with a log notice.
    """
    digits = sorted(digits)
    kept = [d for d in digits if all(d in row for row in rows)]
    for d in digits:
        if d not in kept:
            logger.warning("montage: digit %d missing from at least one row, column omitted", d)
    if not kept:
        raise ValueError("montage has no complete digit columns")
    blocks = [[np.asarray(row[d], dtype=np.float64) for d in kept] for row in rows]
    return np.block(blocks)
