"""Timing comparison of the compiled trig-product kernel vs the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--points 400] [--repeats 5]

The kernel computes prod_n cos(c_n t) over a time grid; it dominates the cost
of the truncation and cascade paths at large magnet sizes, which is why it is
the one piece with a compiled core.
"""

import argparse
import sys
import time

import numpy as np

from qmeas import _kernels_py
from qmeas import kernels


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=400, help="time-grid length")
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    args = parser.parse_args()

    if not kernels.HAVE_COMPILED:
        print("compiled backend not importable; timing the fallback against itself",
              file=sys.stderr)

    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 2.0, args.points)
    print(f"backend: {kernels.BACKEND}; grid points: {args.points}; "
          f"best of {args.repeats}")
    print(f"{'N':>10} {'compiled (s)':>14} {'numpy (s)':>14} {'speedup':>9}")
    for n in (1_000, 10_000, 100_000, 1_000_000):
        coeffs = 2.0 * rng.normal(1.0, 0.05, size=n)
        c, t, m = kernels._prepare(coeffs, grid, None)
        fast = best_of(lambda: kernels.trig_product(c, t, m), args.repeats)
        slow = best_of(lambda: _kernels_py.trig_product(c, t, m), args.repeats)
        a = kernels.trig_product(c, t, m)
        b = _kernels_py.trig_product(c, t, m)
        scale = np.maximum(np.abs(b), 1e-300)
        if np.max(np.abs(a - b) / scale) > 1e-11:
            print("backend disagreement beyond 1e-11", file=sys.stderr)
            return 1
        print(f"{n:>10} {fast:>14.6f} {slow:>14.6f} {slow / fast:>8.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
