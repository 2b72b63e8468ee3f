"""Two-phase tableau simplex with Bland's anti-cycling rule.

Float mode pivots with the compiled kernel; exact mode runs the same steps on
an object array of ``fractions.Fraction`` (the float data are converted
exactly, so the answer is exact for the instance as stored in binary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels

FLOAT_EPS = 1e-11
FEAS_TOL = 1e-9
MAX_PIVOTS = 50_000


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float | None
    pivots: int = 0


def _to_exact(a):
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape, dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(a.reshape(-1)):
        flat[i] = Fraction(v)
    return out


def _std_form(c, A_ub, b_ub, A_eq, b_eq, bounds):
    """Rewrite over nonnegative variables.

    Variables whose bounds contain 0 are split as p - q so that the all-slack
    basis corresponds to x = 0; others are shifted to their finite bound.
    Returns the standard-form data and a recovery map.
    """
    nv = len(c)
    cols = []  # per original var: list of (std index, sign)
    offset = np.zeros(nv)
    extra_ub = []  # (std index, upper bound)
    ns = 0
    for j, (lo, hi) in enumerate(bounds):
        lo = -math.inf if lo is None else float(lo)
        hi = math.inf if hi is None else float(hi)
        if lo > hi:
            raise ValueError(f"empty bounds for variable {j}")
        if lo <= 0.0 <= hi:
            cols.append([(ns, 1.0), (ns + 1, -1.0)])
            if math.isfinite(hi):
                extra_ub.append((ns, hi))
            if math.isfinite(lo):
                extra_ub.append((ns + 1, -lo))
            ns += 2
        elif math.isfinite(lo):
            offset[j] = lo
            cols.append([(ns, 1.0)])
            if math.isfinite(hi):
                extra_ub.append((ns, hi - lo))
            ns += 1
        else:
            offset[j] = hi
            cols.append([(ns, -1.0)])
            ns += 1

    def expand(M):
        M = np.asarray(M, dtype=float).reshape(-1, nv)
        out = np.zeros((M.shape[0], ns))
        for j, lst in enumerate(cols):
            for s, sg in lst:
                out[:, s] += sg * M[:, j]
        return out

    A_ub = np.zeros((0, nv)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nv)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, nv)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nv)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)

    Aub = expand(A_ub)
    bub = b_ub - A_ub @ offset
    if extra_ub:
        rows = np.zeros((len(extra_ub), ns))
        for r, (s, ub) in enumerate(extra_ub):
            rows[r, s] = 1.0
        Aub = np.vstack([Aub, rows])
        bub = np.concatenate([bub, [ub for _, ub in extra_ub]])
    Aeq = expand(A_eq)
    beq = b_eq - A_eq @ offset
    cs = expand(np.asarray(c, dtype=float).reshape(1, nv))[0]
    const = float(np.dot(c, offset))
    return cs, Aub, bub, Aeq, beq, cols, offset, const


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, exact=False) -> LPResult:
    """Maximise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` is a list of (lo, hi) pairs (None for infinite); default is x >= 0.
    """
    nv = len(c)
    if bounds is None:
        bounds = [(0.0, None)] * nv
    cs, Aub, bub, Aeq, beq, cols, offset, const = _std_form(c, A_ub, b_ub, A_eq, b_eq, bounds)
    res = _solve_std(cs, Aub, bub, Aeq, beq, exact)
    if res.status != "optimal":
        return LPResult(res.status, None, None, res.pivots)
    z = res.x
    x = np.array(offset, dtype=float)
    for j, lst in enumerate(cols):
        for s, sg in lst:
            x[j] += sg * float(z[s])
    fun = float(res.fun) + const
    return LPResult("optimal", x, fun, res.pivots)


def _solve_std(c, Aub, bub, Aeq, beq, exact):
    """max c z, Aub z <= bub, Aeq z = beq, z >= 0."""
    ns = len(c)
    mu, me = Aub.shape[0], Aeq.shape[0]
    m = mu + me
    # row sign flips to make rhs >= 0
    rows_A = np.vstack([Aub, Aeq]) if m else np.zeros((0, ns))
    rhs = np.concatenate([bub, beq])
    kind = ["ub"] * mu + ["eq"] * me
    flip = rhs < 0
    # column layout: structural | slack (one per ub row) | artificial (per ge/eq row)
    n_slack = mu
    art_rows = [i for i in range(m) if kind[i] == "eq" or flip[i]]
    n_art = len(art_rows)
    ncol = ns + n_slack + n_art
    T = np.zeros((m + 1, ncol + 1))
    basis = np.zeros(m, dtype=np.int64)
    T[:m, :ns] = rows_A
    T[:m, ncol] = rhs
    for i in range(mu):
        T[i, ns + i] = 1.0
    T[:m][flip] *= -1.0
    for a, i in enumerate(art_rows):
        T[i, ns + n_slack + a] = 1.0
        basis[i] = ns + n_slack + a
    for i in range(mu):
        if not flip[i]:
            basis[i] = ns + i

    if exact:
        T = _to_exact(T)
        eps = 0
    else:
        eps = FLOAT_EPS
    pivots = 0

    art_start = ns + n_slack
    if n_art:
        # phase 1: maximise -sum(art) -> objective row holds +1 on artificials, priced out
        T[m, :] = 0
        T[m, art_start:ncol] = 1
        for i in art_rows:
            T[m] = T[m] - T[i]
        status, piv = _iterate(T, basis, m, ncol, eps, exact)
        pivots += piv
        infeasible = (T[m, ncol] != 0) if exact else (T[m, ncol] < -FEAS_TOL)
        if infeasible:
            return LPResult("infeasible", None, None, pivots)
        # drive artificials out of the basis
        keep = []
        for i in range(m):
            if basis[i] >= art_start:
                cand = [j for j in range(art_start) if (abs(T[i, j]) > eps if not exact else T[i, j] != 0)]
                if cand:
                    _pivot(T, i, cand[0], exact)
                    basis[i] = cand[0]
                    pivots += 1
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[m:m + 1]])
        basis = basis[keep]
        m = len(keep)
        T = np.hstack([T[:, :art_start], T[:, ncol:ncol + 1]])
        ncol = art_start
    # phase 2
    cost = _to_exact(c) if exact else np.asarray(c, dtype=float)
    T[m, :] = 0
    T[m, :ns] = -cost
    for i in range(m):
        j = basis[i]
        if T[m, j] != 0:
            T[m] = T[m] - T[m, j] * T[i]
    status, piv = _iterate(T, basis, m, ncol, eps, exact)
    pivots += piv
    if status == "unbounded":
        return LPResult("unbounded", None, None, pivots)
    z = np.zeros(ns, dtype=object if exact else float)
    for i in range(m):
        if basis[i] < ns:
            z[basis[i]] = T[i, ncol]
    return LPResult("optimal", z, T[m, ncol], pivots)


def _pivot(T, r, c, exact):
    if exact:
        _kernels.pivot_np(T, r, c)
    else:
        _kernels.pivot(T, r, c)


def _iterate(T, basis, m, ncol, eps, exact):
    pivots = 0
    while pivots < MAX_PIVOTS:
        obj = T[m, :ncol]
        enter = -1
        for j in range(ncol):
            if obj[j] < -eps:
                enter = j
                break
        if enter < 0:
            return "optimal", pivots
        best = None
        leave = -1
        for i in range(m):
            a = T[i, enter]
            if a > eps:
                ratio = T[i, ncol] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            return "unbounded", pivots
        _pivot(T, leave, enter, exact)
        basis[leave] = enter
        pivots += 1
    raise RuntimeError("simplex pivot limit reached")
