#!/usr/bin/env python3
"""Benchmark the numba loop kernels against the pure-numpy fallbacks.

Both variants are importable regardless of XBARLSTM_NO_NUMBA, so this
compares them head to head: the experiment-scale workloads of this repo
(95 training windows, 143 evaluation windows, 4 hidden units) plus scaled
sizes where the jitted loops earn their keep (multi-seed Monte-Carlo noise
sweeps, bigger cells).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from xbarlstm import kernels
from xbarlstm.accel import USE_NUMBA


def time_call(fn, *args, repeats):
    fn(*args)  # warm (JIT compile and caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def lstm_case(rng, B, T, N, M):
    return (
        rng.uniform(-1, 1, (4, N, M)),
        rng.uniform(-1, 1, (4, M, M)),
        rng.uniform(-1, 1, (4, M)),
        rng.uniform(-1, 1, M),
        0.1,
        rng.uniform(-1, 1, (B, T, N)),
        rng.uniform(0, 1, B),
    )


def crossbar_case(rng, B, T, N, M):
    R = N + M + 1
    return (
        rng.uniform(0.5e-6, 5e-6, (R, 4 * M)),
        rng.uniform(0.5e-6, 5e-6, (R, 4 * M)),
        1.0 / 4.5e-6,
        rng.uniform(-1, 1, (B, T, N)),
        0.01 * rng.standard_normal((B, T, 4 * M)),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = []

    bptt_sizes = [
        ("training epoch, experiment scale", dict(B=95, T=1, N=1, M=4)),
        ("training epoch, long windows", dict(B=512, T=8, N=1, M=4)),
        ("training epoch, big cell", dict(B=512, T=8, N=4, M=32)),
    ]
    for label, size in bptt_sizes:
        case = lstm_case(rng, **size)
        t_loop = time_call(kernels._batch_loss_and_grads_loop, *case, repeats=args.repeats)
        t_np = time_call(kernels._batch_loss_and_grads_numpy, *case, repeats=args.repeats)
        rows.append(("bptt", label, t_loop, t_np))

    infer_sizes = [
        ("prediction pass, 143 windows", dict(B=143, T=1, N=1, M=4)),
        ("prediction pass, big batch", dict(B=8192, T=4, N=1, M=8)),
    ]
    for label, size in infer_sizes:
        case = lstm_case(rng, **size)[:6]
        t_loop = time_call(kernels._batch_last_predictions_loop, *case, repeats=args.repeats)
        t_np = time_call(kernels._batch_last_predictions_numpy, *case, repeats=args.repeats)
        rows.append(("inference", label, t_loop, t_np))

    xbar_sizes = [
        ("crossbar pass, 143 windows", dict(B=143, T=1, N=1, M=4)),
        ("noise sweep, 100 seeds x 143 windows", dict(B=14300, T=1, N=1, M=4)),
        ("crossbar pass, big cell", dict(B=512, T=16, N=4, M=32)),
    ]
    for label, size in xbar_sizes:
        case = crossbar_case(rng, **size)
        t_loop = time_call(kernels._crossbar_unroll_loop, *case, repeats=args.repeats)
        t_np = time_call(kernels._crossbar_unroll_numpy, *case, repeats=args.repeats)
        rows.append(("crossbar", label, t_loop, t_np))

    loop_label = "numba loop" if USE_NUMBA else "python loop (numba disabled)"
    print(f"\nactive path: {'numba' if USE_NUMBA else 'numpy fallback'}")
    print(f"{'kernel':<10} {'workload':<38} {loop_label:>14} {'numpy':>12} {'speedup':>9}")
    print("-" * 88)
    for kind, label, t_loop, t_np in rows:
        print(f"{kind:<10} {label:<38} {t_loop * 1e3:>11.3f} ms {t_np * 1e3:>9.3f} ms {t_np / t_loop:>8.2f}x")
    print("\nspeedup > 1 means the loop kernel beats the numpy fallback on that workload.")


if __name__ == "__main__":
    main()
