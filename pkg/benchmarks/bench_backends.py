#!/usr/bin/env python3
"""Timing comparison of the numpy and numba jet-evaluation kernels.

Run with the default environment so the numba path is importable:

    python benchmarks/bench_backends.py

Covers the two shapes that dominate real runs: wide batches of grid
points needing only the field value (passive advection), and small
batches of particle positions needing the full jet stack (the RK4
right-hand side).
"""

import time

import numpy as np

from jetflow import backend
from jetflow.jet_algebra import sym_lower


def timeit(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def make_case(rng, M, N, d, order, m):
    X = rng.uniform(-2, 2, size=(M, d))
    q = rng.uniform(-1, 1, size=(N, d))
    a = rng.normal(size=(N, d))
    b = rng.normal(size=(N, d, d)) if order >= 1 else None
    c = sym_lower(rng.normal(size=(N, d, d, d))) if order == 2 else None
    return X, q, a, b, c, 1.0, m


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("grid field, M=4096, N=3, d=2, order 2, m=0", make_case(rng, 4096, 3, 2, 2, 0)),
        ("grid field, M=4096, N=3, d=3, order 1, m=0", make_case(rng, 4096, 3, 3, 1, 0)),
        ("rhs jets,   M=3,    N=3, d=2, order 2, m=3", make_case(rng, 3, 3, 2, 2, 3)),
        ("rhs jets,   M=3,    N=3, d=3, order 2, m=3", make_case(rng, 3, 3, 3, 2, 3)),
    ]
    have_numba = backend.USE_NUMBA
    print(f"active backend: {backend.ACTIVE_BACKEND}")
    print(f"{'case':<46} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, args in cases:
        t_np = timeit(backend.velocity_jets_numpy, *args)
        if have_numba:
            t_nb = timeit(backend.velocity_jets_numba, *args)
            print(f"{name:<46} {t_np*1e3:>8.3f}ms {t_nb*1e3:>8.3f}ms {t_np/t_nb:>7.1f}x")
        else:
            print(f"{name:<46} {t_np*1e3:>8.3f}ms {'n/a':>10} {'':>8}")

    # per-call agreement sanity
    if have_numba:
        X, q, a, b, c, sigma, m = cases[0][1]
        ref = backend.velocity_jets_numpy(X, q, a, b, c, sigma, m)
        out = backend.velocity_jets_numba(X, q, a, b, c, sigma, m)
        gap = max(np.max(np.abs(r - o)) for r, o in zip(ref, out))
        print(f"max backend disagreement: {gap:.2e}")


if __name__ == "__main__":
    main()
