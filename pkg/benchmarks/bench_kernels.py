"""Time the numba and numpy versions of each hot kernel on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Both versions are imported directly, so CRITMULT_JIT does not matter here.
The first jit call (compilation) is excluded from the timings. Outputs are
compared before timing so a fast but wrong kernel is reported as such.
"""

import argparse
import timeit

import numpy as np

from critmult import _kernels as K


def _pivot_case(rng):
    T = rng.standard_normal((60, 120))
    return (lambda f: f(T.copy(), 7, 11)), lambda f: _apply(f, T, 7, 11)


def _apply(f, T, r, c):
    T = T.copy()
    f(T, r, c)
    return T


def _union_case(rng):
    k, members, rows = 4, 16, 3
    E = rng.standard_normal((members, k))
    e = np.zeros(members)
    A = rng.standard_normal((members * rows, k))
    b = np.zeros(members * rows)
    eoff = np.zeros(members + 1, dtype=np.int64)
    eoff[1:] = np.arange(1, members + 1)
    aoff = np.arange(0, members * rows + 1, rows, dtype=np.int64)
    P = rng.standard_normal((20000, k))
    args = (E, e, A, b, eoff, aoff, P, 1e-8)
    return (lambda f: f(*args)), (lambda f: f(*args))


def _segment_case(rng):
    S = 12
    base = rng.standard_normal((S, 2))
    direc = rng.standard_normal((S, 2))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    lo = np.where(rng.random(S) < 0.3, -np.inf, -1.0)
    hi = np.where(rng.random(S) < 0.3, np.inf, 1.0)
    P = rng.standard_normal((50000, 2))
    args = (base, direc, lo, hi, P)
    return (lambda f: f(*args)), (lambda f: f(*args))


def _branch_case(rng):
    N, n, k, ncand = 20000, 3, 2, 4
    R = rng.standard_normal((N, n))
    W = rng.standard_normal((n, k))
    PINV = rng.standard_normal((ncand, k, n))
    signs = np.array([1.0, 0.0])
    pen = np.zeros(N)
    args = (R, W, PINV, signs, pen)
    return (lambda f: f(*args)), (lambda f: f(*args))


CASES = {
    "pivot": (_pivot_case, K.pivot_np, K.pivot_jit),
    "union_member": (_union_case, K.union_member_np, K.union_member_jit),
    "segment_distance": (_segment_case, K.segment_distance_np, K.segment_distance_jit),
    "branch_residuals": (_branch_case, K.branch_residuals_np, K.branch_residuals_jit),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=3)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba is not installed; the jit column falls back to plain Python loops")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'numpy ms':>10} {'jit ms':>10} {'speedup':>8}  outputs")
    for name, (make, f_np, f_jit) in CASES.items():
        run, check = make(rng)
        same = np.allclose(check(f_np), check(f_jit), equal_nan=True)  # also compiles the jit version
        t_np = min(timeit.repeat(lambda: run(f_np), repeat=args.repeat, number=args.number)) / args.number
        t_jit = min(timeit.repeat(lambda: run(f_jit), repeat=args.repeat, number=args.number)) / args.number
        print(f"{name:<18} {1e3 * t_np:>10.3f} {1e3 * t_jit:>10.3f} {t_np / t_jit:>8.2f}  "
              f"{'match' if same else 'MISMATCH'}")


if __name__ == "__main__":
    main()
