"""Compare the compiled and numpy RK4 kernels on state, eta and density propagation.

Usage: python benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from ptmetric import kernels
from ptmetric.families import random_schedule


def cases(dims, steps):
    for d in dims:
        sched = random_schedule(d, seed=d)
        H = sched.samples(np.linspace(0.0, sched.duration, 2 * steps + 1))
        L = np.ascontiguousarray(-1j * H)
        R = np.ascontiguousarray(1j * H)
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
        eye = np.eye(d, dtype=complex)
        yield d, "state", (L, None, psi)
        yield d, "eta", (None, R, eye)
        yield d, "density", (L, R, eye / d)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 4, 8, 16])
    args = ap.parse_args(argv)

    if kernels.rk4_linear_ext is None:
        print("compiled kernel not built; only the numpy kernel is available")
    h = 1.0 / args.steps
    print(f"steps={args.steps}  best of {args.repeat}")
    print(f"{'d':>3} {'kind':>8} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for d, kind, (L, R, y0) in cases(args.dims, args.steps):
        t_py = min(timeit.repeat(lambda: kernels.rk4_linear_py(L, R, y0, h), number=1, repeat=args.repeat))
        if kernels.rk4_linear_ext is None:
            print(f"{d:>3} {kind:>8} {1e3 * t_py:>11.2f} {'-':>12} {'-':>8} {'-':>11}")
            continue
        t_ext = min(timeit.repeat(lambda: kernels.rk4_linear_ext(L, R, y0, h), number=1, repeat=args.repeat))
        diff = np.max(np.abs(kernels.rk4_linear_py(L, R, y0, h) - kernels.rk4_linear_ext(L, R, y0, h)))
        print(f"{d:>3} {kind:>8} {1e3 * t_py:>11.2f} {1e3 * t_ext:>12.2f} {t_py / t_ext:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
