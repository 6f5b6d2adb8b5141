"""Benchmark the accelerated segment kernels against the numpy fallback.

Runs the exact counter and the violation histogram over a range of
dimensions on identical seeded instances under both backends, checks the
integer results agree, and prints per-instance times with the speedup.

Usage:
    python3 benchmarks/bench_kernels.py [--n-list 14,18,20,22] [--repeats 3]
                                        [--alpha 0.5] [--delta 0.05] [--seed 0]

The backend is toggled in process (same switch the PERCEPTRON_LAB_NO_NUMBA
environment flag drives), so one invocation times both.
"""

import argparse
import time

import numpy as np

from perceptron_lab import _kernels
from perceptron_lab.activation import half_space
from perceptron_lab.disorder import gaussian
from perceptron_lab.partition import count_exact, make_instance, violation_profile
from perceptron_lab.streams import SeededStream


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(n_list, alpha, delta, repeats, seed):
    stream = SeededStream(seed)
    rows = []
    for n in n_list:
        m = round(alpha * n)
        inst = make_instance(gaussian(), half_space(0.0), n, m, stream.child(n))
        results = {}
        for backend, flag in (("numba", True), ("numpy", False)):
            if flag and not _kernels.HAS_NUMBA:
                results[backend] = None
                continue
            saved = _kernels.USE_NUMBA
            _kernels.USE_NUMBA = flag
            try:
                count_exact(inst, delta)  # warm-up: JIT compile / allocate
                count_s, count_res = _best_of(lambda: count_exact(inst, delta), repeats)
                hist_s, hist = _best_of(lambda: violation_profile(inst), repeats)
            finally:
                _kernels.USE_NUMBA = saved
            results[backend] = (count_s, count_res.z, hist_s, hist)
        rows.append((n, m, results))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-list", default="14,18,20,22")
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--delta", type=float, default=0.05)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    n_list = [int(v) for v in args.n_list.split(",") if v.strip()]

    rows = bench(n_list, args.alpha, args.delta, args.repeats, args.seed)
    print(f"{'n':>3} {'m':>3} {'count numba':>12} {'count numpy':>12} {'speedup':>8}"
          f" {'hist numba':>12} {'hist numpy':>12} {'speedup':>8}")
    for n, m, results in rows:
        numba_res, numpy_res = results["numba"], results["numpy"]
        if numba_res is None:
            c_nb, h_nb = float("nan"), float("nan")
        else:
            c_nb, z_nb, h_nb, hist_nb = numba_res
        c_np, z_np, h_np, hist_np = numpy_res
        if numba_res is not None:
            assert z_nb == z_np, f"backend mismatch at n={n}: {z_nb} != {z_np}"
            assert np.array_equal(hist_nb, hist_np), f"histogram mismatch at n={n}"
        print(f"{n:>3} {m:>3} {c_nb:>11.4f}s {c_np:>11.4f}s {c_np / c_nb:>7.1f}x"
              f" {h_nb:>11.4f}s {h_np:>11.4f}s {h_np / h_nb:>7.1f}x")
    if not _kernels.HAS_NUMBA:
        print("numba unavailable: only the numpy fallback was timed")


if __name__ == "__main__":
    main()
