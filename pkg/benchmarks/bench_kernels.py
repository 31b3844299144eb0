#!/usr/bin/env python3
"""Timing comparison of the numba and numpy kernel backends.

Runs the four per-point matrix kernels over realistic grid-sized batches
of random Hermitian positive-definite matrices and prints a table with
per-call times and the numba speedup.  Both backends are imported
directly, so the HMA_KERNELS environment flag does not matter here.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from hermitian_ma.kernels import numba_backend, numpy_backend


def random_spd(rng, count, n):
    a = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    return h + (2.0 * n) * np.eye(n)


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = [("n=2, 16^4 points", 16**4, 2), ("n=3, 8^6 points", 8**6, 3)]

    print(f"{'case':<22}{'kernel':<16}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for label, count, n in cases:
        a = random_spd(rng, count, n)
        b = random_spd(rng, count, n)
        kernels = [
            ("det_hermitian", lambda be, a=a: be.det_hermitian(a)),
            ("inv_hermitian", lambda be, a=a: be.inv_hermitian(a)),
            ("min_eig_hermitian", lambda be, a=a: be.min_eig_hermitian(a)),
            ("trace_product", lambda be, a=a, b=b: be.trace_product(a, b)),
        ]
        for name, call in kernels:
            call(numba_backend)  # trigger JIT outside the timed region
            t_np = best_time(lambda: call(numpy_backend), args.repeats)
            t_nb = best_time(lambda: call(numba_backend), args.repeats)
            print(f"{label:<22}{name:<16}{t_np * 1e3:>10.2f}ms"
                  f"{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
