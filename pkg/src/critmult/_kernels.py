"""Hot numeric kernels.

Each kernel has a pure-numpy implementation (``*_np``) and a loop version that
is compiled with ``numba.njit`` when numba is importable. Set the environment
variable ``CRITMULT_JIT=0`` to force the numpy path; the public names below are
bound once at import time.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

JIT_REQUESTED = os.environ.get("CRITMULT_JIT", "1").strip().lower() not in ("0", "false", "no", "off")
HAVE_NUMBA = numba is not None
USE_JIT = JIT_REQUESTED and HAVE_NUMBA


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# -- simplex pivot ----------------------------------------------------------

def pivot_np(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, c] = 0.0
    T[r, c] = 1.0


def _pivot_loop(T, r, c):
    rows, cols = T.shape
    piv = T[r, c]
    for j in range(cols):
        T[r, j] /= piv
    for i in range(rows):
        if i == r:
            continue
        f = T[i, c]
        if f != 0.0:
            for j in range(cols):
                T[i, j] -= f * T[r, j]
        T[i, c] = 0.0
    T[r, c] = 1.0


# -- membership in unions of polyhedra -------------------------------------
# Member j is {z : E_j z = e_j, A_j z <= b_j}. Rows of all members are stacked;
# eoff/aoff hold the row offsets (length members + 1).

def union_member_np(E, e, A, b, eoff, aoff, P, tol):
    N = P.shape[0]
    out = np.zeros(N, dtype=np.bool_)
    scale = np.maximum(1.0, np.abs(P).max(axis=1)) if P.shape[1] else np.ones(N)
    for j in range(len(eoff) - 1):
        ok = np.ones(N, dtype=np.bool_)
        if eoff[j + 1] > eoff[j]:
            Ej = E[eoff[j]:eoff[j + 1]]
            ok &= np.all(np.abs(P @ Ej.T - e[eoff[j]:eoff[j + 1]]) <= tol * scale[:, None], axis=1)
        if aoff[j + 1] > aoff[j]:
            Aj = A[aoff[j]:aoff[j + 1]]
            ok &= np.all(P @ Aj.T - b[aoff[j]:aoff[j + 1]] <= tol * scale[:, None], axis=1)
        out |= ok
    return out


def _union_member_loop(E, e, A, b, eoff, aoff, P, tol):
    N, k = P.shape
    nmem = eoff.shape[0] - 1
    out = np.zeros(N, dtype=np.bool_)
    for p in range(N):
        s = 1.0
        for q in range(k):
            if abs(P[p, q]) > s:
                s = abs(P[p, q])
        for j in range(nmem):
            ok = True
            for r in range(eoff[j], eoff[j + 1]):
                acc = -e[r]
                for q in range(k):
                    acc += E[r, q] * P[p, q]
                if abs(acc) > tol * s:
                    ok = False
                    break
            if ok:
                for r in range(aoff[j], aoff[j + 1]):
                    acc = -b[r]
                    for q in range(k):
                        acc += A[r, q] * P[p, q]
                    if acc > tol * s:
                        ok = False
                        break
            if ok:
                out[p] = True
                break
    return out


# -- distance to a union of planar segments --------------------------------
# Segment j is {base_j + t dir_j : lo_j <= t <= hi_j}, dir_j a unit vector,
# lo/hi possibly infinite.

def segment_distance_np(base, direc, lo, hi, P):
    diff = P[:, None, :] - base[None, :, :]
    t = np.einsum("nsk,sk->ns", diff, direc)
    t = np.clip(t, lo[None, :], hi[None, :])
    proj = base[None, :, :] + t[:, :, None] * direc[None, :, :]
    d = np.sqrt(((P[:, None, :] - proj) ** 2).sum(axis=2))
    return d.min(axis=1)


def _segment_distance_loop(base, direc, lo, hi, P):
    N = P.shape[0]
    S = base.shape[0]
    out = np.empty(N)
    for p in range(N):
        best = np.inf
        for j in range(S):
            dx = P[p, 0] - base[j, 0]
            dy = P[p, 1] - base[j, 1]
            t = dx * direc[j, 0] + dy * direc[j, 1]
            if t < lo[j]:
                t = lo[j]
            if t > hi[j]:
                t = hi[j]
            ex = P[p, 0] - (base[j, 0] + t * direc[j, 0])
            ey = P[p, 1] - (base[j, 1] + t * direc[j, 1])
            d = np.sqrt(ex * ex + ey * ey)
            if d < best:
                best = d
        out[p] = best
    return out


# -- branch residuals for the grid oracle ----------------------------------
# For each row r of R, minimise ||r - W s|| over s where every entry flagged in
# ``signs`` must be >= 0. The active-set candidates are enumerated by the
# caller: PINV[c] maps r to the candidate s (zeros for dropped variables).

def branch_residuals_np(R, W, PINV, signs, pen):
    N = R.shape[0]
    best = np.full(N, np.inf)
    for c in range(PINV.shape[0]):
        S = R @ PINV[c].T
        feas = np.all((S >= -1e-12) | (signs[None, :] == 0), axis=1)
        res = np.sqrt(((R - S @ W.T) ** 2).sum(axis=1))
        best = np.where(feas & (res < best), res, best)
    return best + pen


def _branch_residuals_loop(R, W, PINV, signs, pen):
    N, n = R.shape
    ncand, k, _ = PINV.shape
    out = np.empty(N)
    s = np.empty(k)
    for p in range(N):
        best = np.inf
        for c in range(ncand):
            feas = True
            for a in range(k):
                acc = 0.0
                for q in range(n):
                    acc += PINV[c, a, q] * R[p, q]
                s[a] = acc
                if signs[a] != 0 and acc < -1e-12:
                    feas = False
            if not feas:
                continue
            tot = 0.0
            for q in range(n):
                acc = R[p, q]
                for a in range(k):
                    acc -= W[q, a] * s[a]
                tot += acc * acc
            tot = np.sqrt(tot)
            if tot < best:
                best = tot
        out[p] = best + pen[p]
    return out


pivot_jit = _njit(_pivot_loop)
union_member_jit = _njit(_union_member_loop)
segment_distance_jit = _njit(_segment_distance_loop)
branch_residuals_jit = _njit(_branch_residuals_loop)

if USE_JIT:
    pivot = pivot_jit
    union_member = union_member_jit
    segment_distance = segment_distance_jit
    branch_residuals = branch_residuals_jit
else:
    pivot = pivot_np
    union_member = union_member_np
    segment_distance = segment_distance_np
    branch_residuals = branch_residuals_np


def backend() -> str:
    return "numba" if USE_JIT else "numpy"
