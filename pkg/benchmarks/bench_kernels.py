"""Time the compiled kernels against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from qcflow import kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        tick = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tick)
    return best


def cases():
    rng = np.random.default_rng(0)
    x = np.linspace(-2, 2, 512)
    w = (np.minimum(np.abs(x - 1), 3 * np.abs(x + 1)) + 1).reshape(-1, 1)
    g = np.linspace(-1, 1, 64)
    X, Y = np.meshgrid(g, g, indexing="ij")
    well = np.minimum((X - 0.5) ** 2 + Y**2, (X + 0.5) ** 2 + 2 * Y**2) + 1
    big = np.hypot(*np.meshgrid(np.linspace(-3, 3, 161), np.linspace(-3, 3, 161), indexing="ij")) + 1
    noisy = big + 1e-3 * rng.standard_normal(big.shape)
    return [
        ("envelope 1D exhaustive n=512 q=8", lambda b: kernels.envelope(w, 0.5, 8.0, "exhaustive", b)),
        ("envelope 2D directions 64^2", lambda b: kernels.envelope(well, 0.5, 0.0, "directions", b)),
        ("envelope 2D exhaustive 64^2", lambda b: kernels.envelope(well, 0.5, 0.0, "exhaustive", b)),
        ("qc_scan 2D 161^2 diagonal", lambda b: kernels.qc_scan(noisy, (0.25, 0.5), 0.0, (1, 1), b)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'case':40s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases():
        tp = best_of(lambda: fn("python"), args.repeat)
        if kernels.BACKEND == "cython":
            tc = best_of(lambda: fn(None), args.repeat)
            print(f"{name:40s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}")
        else:
            print(f"{name:40s} {tp:11.4f} {'n/a':>11s} {'n/a':>8s}")


if __name__ == "__main__":
    main()
