"""Throughput comparison of the compiled tick kernel against its pure-Python twin.

Usage:
    python benchmarks/bench_backends.py [--samples 200000] [--ticks 2000] [--n 10000]

Both backends are imported directly (ignoring the import-time selection), run
on identical inputs, and cross-checked for equality before timing is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from feedback_market import _kernels_py


def _load_compiled():
    try:
        from feedback_market import _step_kernel
        return _step_kernel
    except ImportError:
        return None


def timed(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench_sample_steps(backend, counts, P, n_samples):
    return timed(backend.sample_steps, counts, P, 42, 0, n_samples, 0)


def bench_chain(backend, n, ticks, tables):
    counts0 = np.array([int(0.6 * n), int(0.2 * n), n - int(0.6 * n) - int(0.2 * n)])
    a = np.array([[-0.5, 0.25, 0.25], [0.25, -0.5, 0.25], [0.25, 0.25, -0.5]])
    return timed(
        backend.simulate_chain,
        counts0, 1.0, n, ticks, 42, 0,
        backend.RATE_CONSTANT, a, np.zeros((1, 1)), 0.0, 1.0,
        backend.MECH_LUX3, np.zeros(1), np.zeros(1),
        tables["alpha"], tables["beta"], tables["delta"], tables["logf"], 1e-9)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--ticks", type=int, default=2_000)
    ap.add_argument("--n", type=int, default=10_000)
    args = ap.parse_args()

    compiled = _load_compiled()
    rng = np.random.default_rng(1)
    counts = np.array([2, 1, 1])
    P = rng.dirichlet(np.ones(3), size=3)

    k = args.ticks
    tables = {
        "alpha": np.tile([[1.0], [1.0], [1.0]], (1, k + 1)),
        "beta": np.tile([[-1.0], [-0.5], [-0.5]], (1, k + 1)),
        "delta": np.tile([[0.5], [0.5], [0.5]], (1, k + 1)),
        "logf": np.zeros(k + 1),
    }

    out_py, t_py = bench_sample_steps(_kernels_py, counts, P, args.samples)
    print(f"sample_steps ({args.samples} draws, N=4, r=3)")
    print(f"  python  : {t_py:8.3f}s  ({args.samples / t_py:,.0f} draws/s)")
    if compiled is not None:
        out_cy, t_cy = bench_sample_steps(compiled, counts, P, args.samples)
        assert np.array_equal(out_py, out_cy), "backends disagree"
        print(f"  cython  : {t_cy:8.3f}s  ({args.samples / t_cy:,.0f} draws/s)")
        print(f"  speedup : {t_py / t_cy:6.1f}x")

    chain_py, t_py = bench_chain(_kernels_py, args.n, args.ticks, tables)
    print(f"simulate_chain (N={args.n}, {args.ticks} ticks, three-type market)")
    print(f"  python  : {t_py:8.3f}s  ({args.ticks / t_py:,.0f} ticks/s)")
    if compiled is not None:
        chain_cy, t_cy = bench_chain(compiled, args.n, args.ticks, tables)
        assert np.array_equal(chain_py[0], chain_cy[0]), "backends disagree"
        print(f"  cython  : {t_cy:8.3f}s  ({args.ticks / t_cy:,.0f} ticks/s)")
        print(f"  speedup : {t_py / t_cy:6.1f}x")
    if compiled is None:
        print("compiled backend not built; python timings only")


if __name__ == "__main__":
    main()
