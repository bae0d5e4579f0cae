"""Compiled vs pure-Python kernels: timing and agreement.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]
"""

import argparse
import sys
import timeit

import numpy as np

from accelcert import _kernels_py as pure

try:
    from accelcert import _kernels as compiled
except ImportError:
    compiled = None


def theta_case(mod, n):
    out = np.empty(n)
    out[0] = 1.0
    mod.fill_theta(out, 1)
    return out


def phi_case(mod, n):
    out = np.empty(n)
    out[0] = 0.0
    mod.fill_phi(out, 1)
    return out


def jacobi_case(mod, a0):
    a = a0.copy()
    v = np.eye(a.shape[0])
    mod.jacobi_sweeps(a, v, 1e-13 * np.linalg.norm(a0), 100)
    return np.sort(np.diag(a))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    b = rng.normal(size=(27, 27))
    sym = b + b.T
    cases = [
        ("theta recurrence, 1e5 terms", lambda m: theta_case(m, 100_000)),
        ("phi recurrence, 1e5 terms", lambda m: phi_case(m, 100_000)),
        ("Jacobi eigenvalues, 27x27", lambda m: jacobi_case(m, sym)),
    ]
    print(f"{'kernel':32s} {'pure [ms]':>10s} {'compiled [ms]':>14s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in cases:
        tp = min(timeit.repeat(lambda: fn(pure), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        a, c = fn(pure), fn(compiled)
        diff = float(np.max(np.abs(a - c) / np.maximum(1.0, np.abs(a))))
        print(f"{name:32s} {1e3 * tp:10.2f} {1e3 * tc:14.3f} {tp / tc:8.1f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
