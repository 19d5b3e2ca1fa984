#!/usr/bin/env python3
"""Benchmark the compiled image kernels against the pure NumPy fallback.

These kernels run two to four times per test image across whole test sets,
so their per-call cost dominates the filtering/scoring stage of an
experiment.  Usage: python benchmarks/bench_filters.py [--images N]
"""

import argparse
import time

import numpy as np

from cgmca._kernels import available_backends
from cgmca.imaging import gaussian_window


def bench(fn, args_list, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best / len(args_list)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--images", type=int, default=200, help="images per measurement")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    images = [rng.normal(0.4, 0.3, size=(28, 28)) for _ in range(args.images)]
    pairs = [(img, img + rng.normal(0, 0.1, size=(28, 28))) for img in images]
    win = gaussian_window(11, 1.5)

    backends = available_backends()
    if "cython" not in backends:
        print("note: compiled backend unavailable, timing fallback only")

    kernels = {
        "wiener3x3": [(img,) for img in images],
        "median3x3": [(img,) for img in images],
        "ssim_value": [(x, y, 1.0, 0.01, 0.03, win) for x, y in pairs],
    }

    print(f"{'kernel':<12}" + "".join(f"{name + ' (us/img)':>20}" for name in backends) + f"{'speedup':>10}")
    for kernel, call_args in kernels.items():
        times = {name: bench(getattr(mod, kernel), call_args) for name, mod in backends.items()}
        row = f"{kernel:<12}" + "".join(f"{times[name] * 1e6:>20.1f}" for name in backends)
        if "cython" in times and "numpy" in times:
            row += f"{times['numpy'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
