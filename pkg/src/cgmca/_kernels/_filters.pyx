# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel image kernels: the hot loops of the evaluation pipeline.

Same contracts as the pure NumPy fallback in ``_filters_np``; kept in tight
C loops because they run once or twice per test image across whole test
sets.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def wiener3x3(img):
    """Adaptive local-statistics denoiser over 3x3 edge-replicated windows."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] mean = np.empty((h, w))
    cdef cnp.ndarray[double, ndim=2, mode="c"] var = np.empty((h, w))
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((h, w))
    cdef Py_ssize_t i, j, di, dj, ii, jj
    cdef double s, s2, v, m, noise, denom, gain

    noise = 0.0
    for i in range(h):
        for j in range(w):
            s = 0.0
            s2 = 0.0
            for di in range(-1, 2):
                ii = i + di
                if ii < 0:
                    ii = 0
                elif ii >= h:
                    ii = h - 1
                for dj in range(-1, 2):
                    jj = j + dj
                    if jj < 0:
                        jj = 0
                    elif jj >= w:
                        jj = w - 1
                    s += a[ii, jj]
                    s2 += a[ii, jj] * a[ii, jj]
            m = s / 9.0
            v = s2 / 9.0 - m * m
            if v < 0.0:
                v = 0.0
            mean[i, j] = m
            var[i, j] = v
            noise += v
    noise /= h * w

    for i in range(h):
        for j in range(w):
            v = var[i, j]
            denom = v if v > noise else noise
            if denom > 0.0:
                gain = (v - noise if v > noise else 0.0) / denom
            else:
                gain = 0.0
            out[i, j] = mean[i, j] + gain * (a[i, j] - mean[i, j])
    return out


def median3x3(img):
    """Median over 3x3 neighborhoods with zero-padded borders."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((h, w))
    cdef double buf[9]
    cdef Py_ssize_t i, j, di, dj, ii, jj, n, p
    cdef double key

    for i in range(h):
        for j in range(w):
            n = 0
            for di in range(-1, 2):
                ii = i + di
                for dj in range(-1, 2):
                    jj = j + dj
                    if 0 <= ii < h and 0 <= jj < w:
                        buf[n] = a[ii, jj]
                    else:
                        buf[n] = 0.0
                    n += 1
            # insertion sort of the 9 window values
            for n in range(1, 9):
                key = buf[n]
                p = n - 1
                while p >= 0 and buf[p] > key:
                    buf[p + 1] = buf[p]
                    p -= 1
                buf[p + 1] = key
            out[i, j] = buf[4]
    return out


def ssim_value(x, y, double dynamic_range, double k1, double k2, win):
    """Mean structural-similarity over all fully interior window positions."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] ax = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] ay = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] aw = np.ascontiguousarray(win, dtype=np.float64)
    cdef Py_ssize_t h = ax.shape[0], w = ax.shape[1]
    cdef Py_ssize_t wh = aw.shape[0], ww = aw.shape[1]
    cdef Py_ssize_t oh = h - wh + 1, ow = w - ww + 1
    if oh <= 0 or ow <= 0:
        raise ValueError("window larger than image")
    cdef double c1 = (k1 * dynamic_range) * (k1 * dynamic_range)
    cdef double c2 = (k2 * dynamic_range) * (k2 * dynamic_range)
    cdef Py_ssize_t oi, oj, a, b
    cdef double mx, my, mxx, myy, mxy, wv, xv, yv
    cdef double sxx, syy, sxy, num, den, total

    total = 0.0
    for oi in range(oh):
        for oj in range(ow):
            mx = 0.0
            my = 0.0
            mxx = 0.0
            myy = 0.0
            mxy = 0.0
            for a in range(wh):
                for b in range(ww):
                    wv = aw[a, b]
                    xv = ax[oi + a, oj + b]
                    yv = ay[oi + a, oj + b]
                    mx += wv * xv
                    my += wv * yv
                    mxx += wv * (xv * xv)
                    myy += wv * (yv * yv)
                    mxy += wv * (xv * yv)
            sxx = mxx - mx * mx
            syy = myy - my * my
            sxy = mxy - mx * my
            num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
            den = (mx * mx + my * my + c1) * (sxx + syy + c2)
            total += num / den
    return total / (oh * ow)
