"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the
speed-up, and whether both backends returned identical results.
"""
import argparse
import timeit

import numpy as np

from splitsamp import _pykernels as py
from splitsamp import build_shifting_plan

try:
    from splitsamp import _ckernels as cy
except ImportError:
    cy = None


def cases(n, rng):
    plan = build_shifting_plan(10, 5, [(-1, 3)])
    ax = plan.axes[0]
    z = rng.uniform(-1, 3, n)
    b = py.locate(z, ax.edges)
    s = rng.integers(0, 10, n)
    m = ax.cell_of[s, b]
    lo, hi = ax.cover
    u = rng.random(n)
    groups = rng.integers(0, 50, n)
    vals = rng.normal(size=(n, 1))
    key = ax.cell_of
    return {
        "locate": lambda k: k.locate(z, ax.edges),
        "reassign": lambda k: k.reassign(lo[s, m], hi[s, m], ax.cum, u),
        "group_sums": lambda k: k.group_sums(groups, vals, 50),
        "scheme_sums": lambda k: k.scheme_sums(b, groups, vals, key, ax.max_intervals + 1, 50),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-9)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<12}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}{'equal':>8}")
    for name, fn in cases(args.n, rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<12}{t_py:>14.2f}{'n/a':>14}{'':>10}{'':>8}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        eq = same(fn(py), fn(cy))
        print(f"{name:<12}{t_py:>14.2f}{t_cy:>14.2f}{t_py / t_cy:>9.1f}x{str(eq):>8}")


if __name__ == "__main__":
    main()
