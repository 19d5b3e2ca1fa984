"""Pure NumPy implementations of the per-pixel image kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via CGMCA_PURE_PYTHON=1).  Same contracts as the compiled module; results
agree to floating-point roundoff.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def wiener3x3(img):
    """Adaptive local-statistics denoiser over 3x3 edge-replicated windows.

    Per pixel: local mean m and biased variance v over the window; the noise
    power is the mean of all local variances; the output is
    ``m + max(v - noise, 0) / max(v, noise) * (x - m)``.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="edge")
    win = sliding_window_view(padded, (3, 3))
    local_mean = win.sum(axis=(-2, -1)) / 9.0
    local_sq = (win * win).sum(axis=(-2, -1)) / 9.0
    local_var = np.maximum(local_sq - local_mean * local_mean, 0.0)
    noise = local_var.mean()
    denom = np.maximum(local_var, noise)
    gain = np.zeros_like(img)
    np.divide(np.maximum(local_var - noise, 0.0), denom, out=gain, where=denom > 0.0)
    return local_mean + gain * (img - local_mean)


def median3x3(img):
    """Median over 3x3 neighborhoods with zero-padded borders."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="constant", constant_values=0.0)
    win = sliding_window_view(padded, (3, 3)).reshape(img.shape + (9,))
    return np.sort(win, axis=-1)[..., 4]


def ssim_value(x, y, dynamic_range, k1, k2, win):
    """Mean structural-similarity over all fully interior window positions.

    ``win`` is a normalized weighting window; local first and second moments
    are window-weighted sums, and the usual two-factor similarity formula is
    averaged over the valid region.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    xw = sliding_window_view(x, win.shape)
    yw = sliding_window_view(y, win.shape)
    mx = np.einsum("ijkl,kl->ij", xw, win)
    my = np.einsum("ijkl,kl->ij", yw, win)
    sxx = np.einsum("ijkl,kl->ij", xw * xw, win) - mx * mx
    syy = np.einsum("ijkl,kl->ij", yw * yw, win) - my * my
    sxy = np.einsum("ijkl,kl->ij", xw * yw, win) - mx * my
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
