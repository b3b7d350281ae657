"""Compare the compiled and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 400]

Reports the best wall time per call of each kernel for both backends, the
speedup, and the largest relative disagreement between them.  An end-to-end
assignment is timed as well; the backend used there is whichever one
``neutralspec`` selected at import.
"""
import argparse
import timeit

import numpy as np

from neutralspec import _kernels_py
from neutralspec import fixtures as fx
from neutralspec._backend import BACKEND
from neutralspec.pipeline import assign

try:
    from neutralspec import _kernels as _compiled
except ImportError:
    _compiled = None


def cases(size, rng):
    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    x = cplx(size * size) * 3
    lams = cplx(size) * 10
    exps = cplx(32)
    coeffs = cplx(32, 2, 2)
    cols, rows = cplx(size), cplx(size)
    scale = cplx(size)
    return {
        "moment_integral": lambda k: k.moment_integral(x, 2),
        "transform_sum": lambda k: k.transform_sum(lams, exps, coeffs, 1),
        "cauchy_scaled": lambda k: k.cauchy_scaled(cols, rows, scale),
    }


def best_time(fn, repeat, number=3):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=400)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"selected backend: {BACKEND}")
    # size 1 is the per-evaluation regime of Newton and the contour counts;
    # the large size is the batched regime of operator assembly
    for size, number in ((1, 2000), (args.size, 3)):
        print(f"\nsize={size}")
        print(f"{'kernel':<18}{'python [us]':>14}{'compiled [us]':>16}{'speedup':>10}"
              f"{'max rel diff':>15}")
        for name, call in cases(size, rng).items():
            tp = best_time(lambda: call(_kernels_py), args.repeat, number)
            if _compiled is None:
                print(f"{name:<18}{tp * 1e6:>14.1f}{'n/a':>16}")
                continue
            tc = best_time(lambda: call(_compiled), args.repeat, number)
            a, b = call(_kernels_py), call(_compiled)
            diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
            print(f"{name:<18}{tp * 1e6:>14.1f}{tc * 1e6:>16.1f}{tp / tc:>10.2f}{diff:>15.2e}")

    tg = fx.shifted_problem(window=6)
    t = best_time(lambda: assign(tg, solve_window=48), args.repeat)
    print(f"\nassign(window=6, N_s=48) with {BACKEND} backend: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
