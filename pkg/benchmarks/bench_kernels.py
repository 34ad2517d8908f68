"""Time the numba kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run once untimed to trigger compilation, then timed over
``--repeat`` runs; the best time is reported along with the maximum
absolute difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from gmsel._accel import HAS_NUMBA
from gmsel._kernels import changepoint_dp, subset_search


def best_time(func, repeat):
    func()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_subset(repeat, n=20, N=20, p=8, R=100, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, N))
    Y = rng.standard_normal((n, R))
    rows = []
    results = {}
    for name in ("numba", "numpy"):
        t, out = best_time(lambda: subset_search(X, Y, p, backend=name), repeat)
        results[name] = out
        rows.append((f"subset_search n={n} N={N} p={p} R={R}", name, t))
    a, b = results["numba"][0], results["numpy"][0]
    finite = np.isfinite(a)
    diff = float(np.max(np.abs(a[finite] - b[finite])))
    return rows, diff


def bench_changepoint(repeat, n=400, p=10, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat(rng.normal(0, 3, 5), n // 5) + rng.standard_normal(n // 5 * 5)
    rows = []
    results = {}
    for name in ("numba", "numpy"):
        t, out = best_time(lambda: changepoint_dp(y, p, backend=name), repeat)
        results[name] = out
        rows.append((f"changepoint_dp n={y.size} p={p}", name, t))
    diff = float(np.max(np.abs(results["numba"][0] - results["numpy"][0])))
    return rows, diff


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is disabled (GMSEL_DISABLE_NUMBA) or missing; nothing to compare")
    print(f"{'kernel':<44} {'backend':<7} {'best s':>10} {'speedup':>8}")
    for bench in (bench_subset, bench_changepoint):
        rows, diff = bench(args.repeat)
        base = rows[1][2]
        for label, name, t in rows:
            print(f"{label:<44} {name:<7} {t:>10.4f} {base / t:>7.1f}x")
        print(f"{'':<44} max |numba - numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
