#!/usr/bin/env python3
"""Benchmark the numba hot kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/bench_kernels.py``. Set SLDG_NUMBA=0 to confirm
the fallback selection (the numba column then reads n/a).
"""

import time

import numpy as np

from sldg import _accel


def timeit(fn, *args, repeat=7):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mode_matrix(n_points, n_modes):
    x = np.linspace(0.0, 1.0, n_points)
    args = (x, 1.0, n_modes)
    t_np = timeit(_accel.fourier_mode_matrix_numpy, *args)
    t_acc = timeit(_accel.fourier_mode_matrix, *args) if _accel.NUMBA_ENABLED else None
    return t_np, t_acc


def bench_blocks(n_cells, degree, n_quad):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((n_cells, n_quad))
    phi = rng.standard_normal((degree + 1, n_quad))
    w = rng.standard_normal(n_quad)
    widths = np.full(n_cells, 0.5 / n_cells)
    args = (vals, phi, w, widths)
    t_np = timeit(_accel.weighted_blocks_numpy, *args)
    t_acc = timeit(_accel.weighted_blocks, *args) if _accel.NUMBA_ENABLED else None
    return t_np, t_acc


def fmt(t):
    return f"{t * 1e3:9.3f} ms" if t is not None else "      n/a"


def main():
    print(f"numba enabled: {_accel.NUMBA_ENABLED}")
    if _accel.NUMBA_ENABLED:
        # warm the JIT outside the timed region
        _accel.fourier_mode_matrix(np.linspace(0, 1, 8), 1.0, 4)
        _accel.weighted_blocks(np.ones((2, 4)), np.ones((2, 4)), np.ones(4), np.ones(2))

    print(f"{'kernel':<44}{'numpy':>12}{'numba':>12}{'speedup':>9}")
    for n_points, n_modes in ((4096, 33), (65536, 65), (262144, 129)):
        t_np, t_acc = bench_mode_matrix(n_points, n_modes)
        ratio = f"{t_np / t_acc:7.2f}x" if t_acc else "      -"
        print(f"{f'mode matrix  P={n_points} K={n_modes}':<44}"
              f"{fmt(t_np)}{fmt(t_acc)}{ratio}")
    for n_cells, degree, n_quad in ((1024, 1, 4), (8192, 2, 5), (65536, 3, 6)):
        t_np, t_acc = bench_blocks(n_cells, degree, n_quad)
        ratio = f"{t_np / t_acc:7.2f}x" if t_acc else "      -"
        print(f"{f'cell blocks  J={n_cells} k={degree} nq={n_quad}':<44}"
              f"{fmt(t_np)}{fmt(t_acc)}{ratio}")


if __name__ == "__main__":
    main()
