"""Compare the compiled and pure-Python box-QP coordinate-descent kernels.

Usage: python benchmarks/bench_kernels.py [--sizes 10 20 50] [--repeat 5]
"""

import argparse
import time

import numpy as np

from gapgraph._kernels import BACKEND, box_qp_cd, box_qp_cd_py


def instance(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 2 * n))
    Q = A @ A.T / (2 * n) + 0.1 * np.eye(n)
    s = rng.standard_normal(n)
    return Q, s.copy(), s - 0.1, s + 0.1


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {BACKEND}")
    if BACKEND != "cython":
        print("compiled kernel unavailable; only the Python kernel is timed")
    print(f"{'n':>5} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8} {'max |dx|':>10}")
    for n in args.sizes:
        Q, x0, lo, hi = instance(n, n)
        call = (Q, x0, lo, hi, 1e-10, 1000)
        t_py = best_time(box_qp_cd_py, call, args.repeat)
        x_py = box_qp_cd_py(*call)[0]
        if BACKEND == "cython":
            t_c = best_time(box_qp_cd, call, args.repeat)
            diff = np.max(np.abs(box_qp_cd(*call)[0] - x_py))
            print(f"{n:>5} {1e3 * t_py:12.3f} {1e3 * t_c:14.3f} {t_py / t_c:8.1f} {diff:10.2e}")
        else:
            print(f"{n:>5} {1e3 * t_py:12.3f} {'-':>14} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
