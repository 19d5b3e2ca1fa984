"""Synthetic handwritten-style digit corpus, written as standard IDX files.

Digits are drawn as stroke skeletons (lines, quadratic curves, elliptic
arcs) with jittered control points, random rotation/shear/scale/shift, and
Gaussian ink of random width and intensity, then quantized to 8 bits.  The
result has the layout of the usual handwriting corpus (big-endian IDX
containers, 28x28 images, labels 0-9) and a smoothly decaying class
covariance spectrum, so the full train/corrupt/recover pipeline can run in
environments where the real corpus cannot be downloaded.  Everything is
deterministic given the seed.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .imaging import IMAGE_SIDE

# Stroke skeletons in the unit square, x right / y down:
#   ("line", p0, p1), ("quad", p0, p1, p2) quadratic curve,
#   ("arc", center, rx, ry, a0, a1) with y-down angles.
_TWO_PI = 2.0 * np.pi
_STROKES = {
    0: [("arc", (0.50, 0.50), 0.24, 0.36, 0.0, _TWO_PI)],
    1: [("line", (0.50, 0.10), (0.50, 0.90)), ("line", (0.36, 0.26), (0.50, 0.10))],
    2: [
        ("arc", (0.50, 0.32), 0.23, 0.22, np.pi, _TWO_PI + 0.35),
        ("quad", (0.72, 0.40), (0.62, 0.62), (0.27, 0.85)),
        ("line", (0.27, 0.85), (0.76, 0.85)),
    ],
    3: [
        ("quad", (0.30, 0.17), (0.62, 0.02), (0.68, 0.30)),
        ("quad", (0.68, 0.30), (0.66, 0.46), (0.45, 0.50)),
        ("quad", (0.45, 0.50), (0.78, 0.50), (0.72, 0.78)),
        ("quad", (0.72, 0.78), (0.60, 0.97), (0.28, 0.80)),
    ],
    4: [
        ("line", (0.58, 0.08), (0.22, 0.58)),
        ("line", (0.22, 0.58), (0.80, 0.58)),
        ("line", (0.62, 0.30), (0.62, 0.92)),
    ],
    5: [
        ("line", (0.70, 0.12), (0.32, 0.12)),
        ("line", (0.32, 0.12), (0.30, 0.42)),
        ("quad", (0.30, 0.42), (0.75, 0.30), (0.72, 0.62)),
        ("quad", (0.72, 0.62), (0.68, 0.90), (0.28, 0.78)),
    ],
    6: [
        ("quad", (0.62, 0.08), (0.32, 0.20), (0.30, 0.55)),
        ("arc", (0.47, 0.64), 0.19, 0.20, 0.0, _TWO_PI),
    ],
    7: [("line", (0.24, 0.12), (0.76, 0.12)), ("line", (0.76, 0.12), (0.40, 0.90))],
    8: [
        ("arc", (0.50, 0.30), 0.16, 0.17, 0.0, _TWO_PI),
        ("arc", (0.50, 0.68), 0.20, 0.20, 0.0, _TWO_PI),
    ],
    9: [
        ("arc", (0.50, 0.32), 0.20, 0.20, 0.0, _TWO_PI),
        ("quad", (0.70, 0.32), (0.68, 0.62), (0.42, 0.90)),
    ],
}

_SAMPLES_PER_STROKE = 44


def _stroke_points(stroke, rng: np.random.Generator) -> np.ndarray:
    kind = stroke[0]
    t = np.linspace(0.0, 1.0, _SAMPLES_PER_STROKE)[:, None]
    if kind == "line":
        p0, p1 = (np.asarray(p) + rng.normal(0.0, 0.02, 2) for p in stroke[1:])
        return (1 - t) * p0 + t * p1
    if kind == "quad":
        p0, p1, p2 = (np.asarray(p) + rng.normal(0.0, 0.02, 2) for p in stroke[1:])
        return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2
    if kind == "arc":
        center = np.asarray(stroke[1]) + rng.normal(0.0, 0.015, 2)
        rx = stroke[2] * rng.uniform(0.88, 1.12)
        ry = stroke[3] * rng.uniform(0.88, 1.12)
        ang = stroke[4] + (stroke[5] - stroke[4]) * t[:, 0]
        return center + np.stack([rx * np.cos(ang), ry * np.sin(ang)], axis=1)
    raise ValueError(f"unknown stroke kind {kind!r}")


def _smooth_field(rng: np.random.Generator, coarse: int, side: int) -> np.ndarray:
    """Random smooth per-image field: coarse Gaussian grid, bilinear upsample."""
    grid = rng.normal(size=(coarse, coarse))
    src = np.linspace(0.0, coarse - 1.0, side)
    i0 = np.clip(src.astype(int), 0, coarse - 2)
    frac = src - i0
    rows = grid[i0] * (1 - frac)[:, None] + grid[i0 + 1] * frac[:, None]
    return rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :]


def render_digit(digit: int, rng: np.random.Generator) -> np.ndarray:
    """Render one jittered 28x28 digit image, uint8 in 0..255 (ink bright).

    Style variability mimics scanned handwriting: control-point jitter,
    global rotation/shear/scale/shift, a sinusoidal elastic warp, stroke
    width and intensity modulated along each stroke, and a multiplicative
    smooth ink texture.  The spread of these independent effects gives each
    digit class a slowly decaying, high-rank covariance spectrum.
    """
    pts_list, width_list, amp_list = [], [], []
    for stroke in _STROKES[digit]:
        pts = _stroke_points(stroke, rng)
        m = pts.shape[0]
        t = np.linspace(0.0, 1.0, m)
        base_w = rng.uniform(0.6, 1.2)
        mod = 1.0 + rng.uniform(0.1, 0.35) * np.sin(
            2.0 * np.pi * rng.uniform(0.5, 1.6) * t + rng.uniform(0, 2 * np.pi)
        )
        base_a = rng.uniform(0.75, 1.0)
        amp_mod = 1.0 + rng.uniform(0.05, 0.25) * np.sin(
            2.0 * np.pi * rng.uniform(0.5, 1.5) * t + rng.uniform(0, 2 * np.pi)
        )
        pts_list.append(pts)
        width_list.append(base_w * mod)
        amp_list.append(np.clip(base_a * amp_mod, 0.3, 1.0))
    pts = np.concatenate(pts_list)
    widths = np.concatenate(width_list)
    amps = np.concatenate(amp_list)

    pts -= 0.5
    angle = rng.uniform(-0.25, 0.25)
    shear = rng.uniform(-0.2, 0.2)
    sx, sy = rng.uniform(0.82, 1.08, 2)
    c, s = np.cos(angle), np.sin(angle)
    lin = np.array([[c, -s], [s, c]]) @ np.array([[sx, shear * sx], [0.0, sy]])
    pts = pts @ lin.T + 0.5 + rng.uniform(-0.05, 0.05, 2)
    # elastic warp: low-frequency sinusoidal displacement
    wx = rng.uniform(0.015, 0.045)
    wy = rng.uniform(0.015, 0.045)
    fx, fy = rng.uniform(1.0, 2.5, 2)
    px, py = rng.uniform(0, 2 * np.pi, 2)
    pts[:, 0] += wx * np.sin(2 * np.pi * fx * pts[:, 1] + px)
    pts[:, 1] += wy * np.sin(2 * np.pi * fy * pts[:, 0] + py)

    pix = 2.0 + pts * (IMAGE_SIDE - 4)
    grid = np.arange(IMAGE_SIDE, dtype=np.float64)
    dx2 = (grid[:, None] - pix[None, :, 0]) ** 2  # (cols, samples)
    dy2 = (grid[:, None] - pix[None, :, 1]) ** 2  # (rows, samples)
    d2 = dy2[:, None, :] + dx2[None, :, :]
    ink = (amps * np.exp(-d2 / (2.0 * widths**2))).max(axis=2)
    ink *= 1.0 + 0.2 * _smooth_field(rng, 7, IMAGE_SIDE)
    return np.clip(np.rint(ink * 255.0), 0, 255).astype(np.uint8)


def generate_corpus(
    n_per_digit: int, seed: int = 0, digits=tuple(range(10))
) -> tuple[np.ndarray, np.ndarray]:
    """Render a shuffled corpus; returns (images (N, 28, 28) uint8, labels (N,) uint8)."""
    digits = sorted(digits)
    rng = np.random.default_rng([seed, 0x5D])
    images = np.empty((n_per_digit * len(digits), IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    labels = np.empty(n_per_digit * len(digits), dtype=np.uint8)
    pos = 0
    for d in digits:
        digit_rng = np.random.default_rng([seed, d, 0xD161])
        for _ in range(n_per_digit):
            images[pos] = render_digit(d, digit_rng)
            labels[pos] = d
            pos += 1
    order = rng.permutation(len(labels))
    return images[order], labels[order]


def _open_for_write(path):
    path = str(path)
    if path.endswith(".gz"):
        # mtime pinned so identical corpora produce identical bytes
        return gzip.GzipFile(path, "wb", compresslevel=6, mtime=0)
    return open(path, "wb")


def write_idx_files(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write big-endian IDX image/label containers (gzip when the path ends in .gz)."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    if labels.shape != (n,):
        raise ValueError(f"label count {labels.shape} does not match image count {n}")
    with _open_for_write(images_path) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())
    with _open_for_write(labels_path) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())


def make_demo_corpus(
    out_dir, n_per_digit: int = 600, seed: int = 0, digits=tuple(range(10))
) -> tuple[Path, Path]:
    """Generate and write a demo corpus; returns (images_path, labels_path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, labels = generate_corpus(n_per_digit, seed=seed, digits=digits)
    images_path = out_dir / "train-images-idx3-ubyte.gz"
    labels_path = out_dir / "train-labels-idx1-ubyte.gz"
    write_idx_files(images, labels, images_path, labels_path)
    return images_path, labels_path
