"""Time the numba kernels against the pure-numpy fallback.

Runs the three hot kernels on a realistic workload (a 12x10 map over a
random 40-part instance) and prints per-kernel timings plus the speedup.
The numba column disappears when numba is missing or disabled via
SOMCELL_DISABLE_NUMBA=1.

Usage: python3 benchmarks/bench_backends.py [--repeats N] [--parts P] [--machines M]
"""
import argparse
import time

import numpy as np

from somcell import MapGrid
from somcell.kernels import HAVE_NUMBA, numba_backend, numpy_backend


def build_workload(rng, parts, machines, grid):
    samples = (rng.random((parts, machines)) < 0.4).astype(np.float64)
    codebook = rng.random((grid.units, machines))
    epochs, steps = 30, 30 * parts
    orders = np.stack([rng.permutation(parts) for _ in range(epochs)]).astype(np.int64)
    alphas = np.linspace(0.5, 0.01, steps)
    sigmas = np.linspace(grid.rows / 2, 0.1, steps)
    k = 3
    block_ones = rng.integers(0, parts // k + 1, size=(k, machines)).astype(np.int64)
    block_sizes = np.full(k, parts // k, dtype=np.int64)
    n_ones = max(1, int(block_ones.sum()))
    return {
        "batch_bmu": (codebook, samples),
        "train_run": (codebook, samples, orders, alphas, sigmas, np.asarray(grid.distance_sq)),
        "best_machine_split": (block_ones, block_sizes, n_ones),
    }


def time_call(func, args, repeats):
    func(*args)  # warm-up: JIT compilation and cache effects stay out of the clock
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--parts", type=int, default=40)
    ap.add_argument("--machines", type=int, default=10)
    args = ap.parse_args()

    rng = np.random.default_rng(42)
    work = build_workload(rng, args.parts, args.machines, MapGrid(12, 10))
    backends = {"numpy": numpy_backend}
    if HAVE_NUMBA:
        backends["numba"] = numba_backend
    else:
        print("numba unavailable or disabled; timing the numpy backend only")

    print(f"workload: {args.parts} parts x {args.machines} machines, 12x10 map, best of {args.repeats}")
    for kernel, inputs in work.items():
        times = {}
        for name, backend in backends.items():
            times[name] = time_call(backend[kernel], inputs, args.repeats)
        line = f"{kernel:20s} " + "  ".join(f"{name} {t * 1e3:8.3f} ms" for name, t in times.items())
        if len(times) == 2:
            line += f"  speedup x{times['numpy'] / times['numba']:.1f}"
        print(line)


if __name__ == "__main__":
    main()
