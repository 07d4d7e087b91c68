"""Time the two convolution kernels and check they agree bit for bit.

    python3 benchmarks/bench_kernels.py [--sizes 64 256 1024] [--digits 150] [--repeat 3]

Also times an end-to-end moment matrix (square map series) under each kernel.
"""

import argparse
import time

import mpmath as mp
import numpy as np

from bergpoly import _kernels, geometry, moments
from bergpoly._precision import GUARD_BITS, dps_to_bits


def _random_fixed(n, bits, rng):
    # uniform fixed-point values in (-1, 1) at the given scale
    shift = max(bits - 62, 0)
    re = [int(x) << shift for x in rng.integers(-(1 << 62), 1 << 62, size=n)]
    im = [int(x) << shift for x in rng.integers(-(1 << 62), 1 << 62, size=n)]
    return re, im


def best_of(fn, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        t.append(time.perf_counter() - t0)
    return min(t), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256, 1024])
    ap.add_argument("--digits", type=int, default=150)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--nmax", type=int, default=16, help="degree for the end-to-end moment run")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(7)
    bits = dps_to_bits(args.digits) + GUARD_BITS
    print(f"complex convolution, {bits}-bit fixed point")
    print(f"{'n':>6} {'schoolbook s':>14} {'kronecker s':>13} {'speedup':>8} identical")
    for n in args.sizes:
        a = _random_fixed(n, bits, rng)
        b = _random_fixed(n, bits, rng)
        res = {}
        for k in ("schoolbook", "kronecker"):
            prev = _kernels.set_kernel(k)
            try:
                res[k] = best_of(lambda: _kernels.cconv(a, b), args.repeat)
            finally:
                _kernels.set_kernel(prev)
        same = res["schoolbook"][1] == res["kronecker"][1]
        ts, tk = res["schoolbook"][0], res["kronecker"][0]
        print(f"{n:6d} {ts:14.4f} {tk:13.4f} {ts / tk:8.1f} {same}")

    print(f"\nmoment matrix of the square map, N={args.nmax}")
    spec = geometry.catalog("square_map", (1,), n_max=args.nmax)
    mats = {}
    for k in ("schoolbook", "kronecker"):
        prev = _kernels.set_kernel(k)
        moments._POWER_MEMO.clear()
        try:
            t, m = best_of(lambda: moments.series_moments(spec.psi, args.nmax), 1)
        finally:
            _kernels.set_kernel(prev)
        mats[k] = m
        print(f"{k:>10}: {t:.3f} s")
    with mp.workdps(spec.precision_digits):
        same = all(mats["schoolbook"][j][k] == mats["kronecker"][j][k]
                   for j in mats["kronecker"] for k in range(args.nmax + 1))
    print(f"identical entries: {same}")


if __name__ == "__main__":
    main()
