"""Brute-force, definition-level checks used to validate the analytic code.

Nothing here is fast or clever on purpose. Tangent cones are probed by
walking along ``base + t d`` for a decreasing grid of ``t``; critical
multipliers are searched on grids of multipliers and unit directions with the
dual direction eliminated by a small bounded least-squares solve; derivatives
are compared against central differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from . import gcatalog as gc
from .errors import BaseNotInSet, Unsupported
from .smoothfn import Expr, eval012
from .stationarity import CompositeProblem, faces, graph_points, local_data, multiplier_polytope


# -- sampled tangent cones -------------------------------------------------------

@dataclass(frozen=True)
class TangentParams:
    j_min: int = 4
    j_max: int = 20
    delta: float = 1e-6  # direction perturbation radius
    samples: int = 8  # random perturbed directions per t (membership-only sets)
    base_radius: float = 1e-3  # neighbourhood for nearby base points (T#)
    base_count: int = 24
    seed: int = 0

    def t_grid(self, scale: float = 1.0) -> np.ndarray:
        return scale * 2.0 ** -np.arange(self.j_min, self.j_max + 1, dtype=float)


class SampledSet:
    """A set known through a vectorised membership test and, optionally, a distance."""

    def __init__(self, k: int, member: Callable[[np.ndarray], np.ndarray],
                 distance: Callable[[np.ndarray], np.ndarray] | None = None,
                 base_sampler: Callable | None = None, tol: float = 1e-9):
        self.k = k
        self._member = member
        self.distance = distance
        self.base_sampler = base_sampler
        self.tol = tol

    def member(self, P) -> np.ndarray:
        P = np.ascontiguousarray(np.asarray(P, dtype=float).reshape(-1, self.k))
        return np.asarray(self._member(P), dtype=bool)

    def near(self, P, radius) -> np.ndarray:
        """Whether each point has a point of the set within ``radius`` (per row)."""
        P = np.ascontiguousarray(np.asarray(P, dtype=float).reshape(-1, self.k))
        radius = np.broadcast_to(np.asarray(radius, dtype=float), (P.shape[0],))
        if self.distance is None:
            raise ValueError("no distance function")
        scale = np.maximum(1.0, np.abs(P).max(axis=1))
        return self.distance(P) <= radius * (1.0 + self.tol) + 1e-15 * scale


def polyhedron_set(P) -> SampledSet:
    """Wrap a :class:`critmult.conealg.Polyhedron` for the oracle."""
    return SampledSet(P.k, lambda Z: P.contains_batch(Z, 1e-12))


def graph_set(piece: gc.GPiece) -> SampledSet:
    """gph dg_i with its exact distance and an on-graph sampler."""
    return SampledSet(2, lambda Z: gc.graph_distance_batch(piece, Z) <= 1e-12 * np.maximum(1, np.abs(Z).max(axis=1)),
                      distance=lambda Z: gc.graph_distance_batch(piece, Z),
                      base_sampler=_graph_sampler(piece))


def _graph_sampler(piece):
    pieces = gc.graph_pieces(piece)

    def sample(rng, base, radius, count):
        out = []
        near = [g for g in pieces if g.nearest(base)[1] <= radius]
        for i in range(count):
            g = near[i % len(near)]
            t0 = g.param(base)
            lo, hi = max(g.lo, t0 - radius), min(g.hi, t0 + radius)
            t = lo if lo == hi else rng.uniform(lo, hi)
            pt = g.point(t)
            if np.linalg.norm(pt - base) <= radius:
                out.append(pt)
        return np.array(out).reshape(-1, 2)

    return sample


def _boundary_bases(S: SampledSet, base, p: TangentParams, rng) -> np.ndarray:
    """On-set points near base, pushed onto the relative boundary when possible.

    Points whose whole neighbourhood (probed along coordinate axes) stays in
    the set are kept as they are, so interior bases only survive when the base
    itself is surrounded by the set.
    """
    k = S.k
    r = p.base_radius
    if S.base_sampler is not None:
        return S.base_sampler(rng, base, r, p.base_count)
    cand = base + rng.uniform(-r, r, size=(40 * p.base_count, k))
    cand = cand[S.member(cand)][: p.base_count]
    axes = np.vstack([np.eye(k), -np.eye(k)])
    out = []
    for q in cand:
        exits = [a for a in axes if not S.member(q + 2 * r * a)[0]]
        if not exits:
            out.append(q)
            continue
        a = exits[rng.integers(len(exits))]
        lo, hi = 0.0, 2 * r
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if S.member(q + mid * a)[0]:
                lo = mid
            else:
                hi = mid
        out.append(q + lo * a)
    return np.array(out).reshape(-1, k)


def _tangent_at(S: SampledSet, bases, scales, D, p: TangentParams, rng) -> np.ndarray:
    """For each direction row of D: does some base pass the walk test at its scale?"""
    N, k = D.shape
    ok_any = np.zeros(N, dtype=bool)
    for b, s in zip(bases, scales):
        ts = p.t_grid(s)
        P = b[None, None, :] + ts[None, :, None] * D[:, None, :]  # (N, T, k)
        if S.distance is not None:
            rad = (p.delta * ts)[None, :].repeat(N, axis=0)
            hit = S.near(P.reshape(-1, k), rad.reshape(-1)).reshape(N, ts.size)
        else:
            hit = S.member(P.reshape(-1, k)).reshape(N, ts.size)
            for _ in range(p.samples):
                e = rng.standard_normal((N, 1, k))
                e *= p.delta * rng.uniform(0, 1, (N, 1, 1)) ** (1 / k) / np.linalg.norm(e, axis=2, keepdims=True)
                Q = b[None, None, :] + ts[None, :, None] * (D[:, None, :] + e)
                hit |= S.member(Q.reshape(-1, k)).reshape(N, ts.size)
        ok_any |= hit.all(axis=1)
    return ok_any


def tangent_batch(S: SampledSet, base, D, kind: str = "T", params: TangentParams | None = None) -> np.ndarray:
    """Vectorised :func:`sample_tangent` over the rows of ``D``."""
    p = params or TangentParams()
    base = np.asarray(base, dtype=float).reshape(-1)
    if not S.member(base)[0]:
        raise BaseNotInSet("base point is not in the set")
    D = np.asarray(D, dtype=float).reshape(-1, S.k)
    norms = np.linalg.norm(D, axis=1)
    zero = norms == 0
    U = D / np.where(zero, 1.0, norms)[:, None]
    rng = np.random.default_rng(p.seed)
    bases, scales = [base], [1.0]
    if kind == "Tsharp":
        for q in _boundary_bases(S, base, p, rng):
            dist = float(np.linalg.norm(q - base))
            if dist > 0:
                bases.append(q)
                scales.append(1e-3 * dist)
    elif kind != "T":
        raise ValueError(f"kind must be 'T' or 'Tsharp', got {kind!r}")
    out = _tangent_at(S, np.array(bases), scales, U, p, rng)
    return out | zero


def sample_tangent(membership, base, d, kind: str = "T", params: TangentParams | None = None) -> bool:
    """Definition-based tangent test of ``d`` at ``base``.

    ``membership`` is a :class:`SampledSet` or a vectorised predicate on
    ``(N, k)`` arrays. For kind ``T`` the walk ``base + t d`` must stay within
    ``delta * t`` of the set for every ``t = 2^-j``, ``j = 4..20``. For
    ``Tsharp`` it is enough that the walk works from one nearby base point on
    the set, at a step scale below that point's distance to ``base``.
    """
    base = np.asarray(base, dtype=float).reshape(-1)
    S = membership if isinstance(membership, SampledSet) else SampledSet(base.size, membership)
    return bool(tangent_batch(S, base, np.asarray(d, dtype=float).reshape(1, -1), kind, params)[0])


# -- grid search for critical multipliers ----------------------------------------

@dataclass
class GridWitness:
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    residual: float


def _member_rule(c):
    """Describe a planar cone {(a, b)} as a rule for b given a.

    Returns (kappa, sign, beta, pen) where b = kappa a when kappa is not
    None, otherwise b is free (sign 0) or sign * (b - beta a) >= 0; ``pen``
    maps an array of a to the violation of the constraints on a alone.
    """
    kappa = None
    pen_rows = []  # (coef, is_eq)
    for e0, e1 in c.E:
        if e1 != 0.0:
            k_new = -e0 / e1
            if kappa is not None and k_new != kappa:
                pen_rows.append(("eq", e0 + e1 * kappa))
                continue
            kappa = k_new
        else:
            pen_rows.append(("eq", e0))
    sign, beta = 0, 0.0
    for a0, a1 in c.A:
        if a1 == 0.0:
            pen_rows.append(("le", a0))
        elif kappa is not None:
            pen_rows.append(("le", a0 + a1 * kappa))
        else:
            s_new = -1 if a1 > 0 else 1
            b_new = -a0 / a1
            if sign not in (0, s_new) or (sign == s_new and b_new != beta):
                raise Unsupported("bounded dual intervals are not supported by the grid oracle")
            sign, beta = s_new, b_new

    def pen(a):
        tot = np.zeros_like(a)
        for kind, coef in pen_rows:
            tot += np.abs(coef * a) if kind == "eq" else np.maximum(coef * a, 0.0)
        return tot

    return kappa, sign, beta, pen


def _pinv_candidates(W, signs):
    """Least-squares maps for every subset of the sign-constrained variables set to zero."""
    n, k = W.shape
    constrained = [j for j in range(k) if signs[j] != 0]
    out = []
    for size in range(len(constrained) + 1):
        for drop in itertools.combinations(constrained, size):
            keep = [j for j in range(k) if j not in drop]
            P = np.zeros((k, n))
            if keep:
                P[keep] = np.linalg.pinv(W[:, keep])
            out.append(P)
    return np.stack(out)


def _branch_residual(H_list, B, combo, DX):
    """min over dy of ||H(y) dx + B^T dy|| plus constraint penalties, for rows (y, dx)."""
    m, n = B.shape
    N = DX.shape[0]
    A_vals = DX @ B.T  # (N, m)
    r0 = np.einsum("nij,nj->ni", H_list, DX)
    pen = np.zeros(N)
    cols, signs, fixed = [], [], np.zeros((N, m))
    for i, c in enumerate(combo):
        kappa, sign, beta, penf = _member_rule(c)
        pen += penf(A_vals[:, i])
        if kappa is not None:
            fixed[:, i] = kappa * A_vals[:, i]
        else:
            fixed[:, i] = beta * A_vals[:, i] if sign else 0.0
            cols.append((i, sign))
    r0 = r0 + fixed @ B
    if cols:
        W = np.column_stack([(s if s else 1) * B[i] for i, s in cols])
        sg = np.array([1 if s else 0 for _, s in cols], dtype=np.int64)
    else:
        W = np.zeros((n, 0))
        sg = np.zeros(0, dtype=np.int64)
    PINV = _pinv_candidates(W, sg)
    R = np.ascontiguousarray(-r0)
    res = _kernels.branch_residuals(R, np.ascontiguousarray(W), np.ascontiguousarray(PINV), sg, pen)
    return res, fixed, cols, W, PINV


def sphere_directions(n: int, res: float = 0.01) -> np.ndarray:
    """Grid on the boundary of the unit sup-norm ball with spacing ``res``."""
    k = int(round(2.0 / res))
    g = np.linspace(-1.0, 1.0, k + 1)
    pts = []
    for j in range(n):
        for s in (-1.0, 1.0):
            if n == 1:
                pts.append(np.array([[s]]))
                continue
            mesh = np.stack(np.meshgrid(*([g] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
            P = np.insert(mesh, j, s, axis=1)
            pts.append(P)
    D = np.unique(np.vstack(pts), axis=0)
    return D


def _multiplier_grid(face, step, box):
    if face.dim == 0:
        return face.point[None, :]
    if face.dim == 1:
        z = face.Z[:, 0]
        t_lo, t_hi = face.interval(z)
        for i in range(z.size):
            if abs(z[i]) > 1e-14:
                a, b = sorted(((-box - face.point[i]) / z[i], (box - face.point[i]) / z[i]))
                t_lo, t_hi = max(t_lo, a), min(t_hi, b)
        if not t_lo <= t_hi:
            return np.zeros((0, face.point.size))
        s = step / np.abs(z).max()
        ts = np.arange(math.ceil(t_lo / s), math.floor(t_hi / s) + 1) * s
        return face.point[None, :] + ts[:, None] * z[None, :]
    # higher-dimensional faces: coarse box grid in face coordinates
    r = face.dim
    k = max(3, int(round((2 * box / step) ** (1.0 / r))) if r > 2 else int(2 * box / step) + 1)
    k = min(k, int(2e4 ** (1.0 / r)))
    g = np.linspace(-box, box, k)
    C = np.stack(np.meshgrid(*([g] * r), indexing="ij"), axis=-1).reshape(-1, r)
    Y = face.point[None, :] + C @ face.Z.T
    ok = np.all((Y >= face.lo - 1e-12) & (Y <= face.hi + 1e-12), axis=1) & np.all(np.abs(Y) <= box + 1e-12, axis=1)
    return Y[ok]


def grid_critical_search(p: CompositeProblem, x, ybar=None, kind: str = "graphical", y_step: float = 0.01,
                         box: float = 3.0, dir_res: float = 0.01, tol: float = 1e-6,
                         refine: int = 60) -> GridWitness | None:
    """Brute-force search for a critical multiplier (or only at ``ybar``).

    Multipliers come from a grid on each face of the multiplier polytope
    intersected with ``[-box, box]^m``; directions from a grid on the
    sup-norm unit sphere. The dual direction is eliminated per branch by
    bounded least squares. For n <= 2 the best grid directions are refined by
    golden-section search along the sphere.
    """
    tkind = {"graphical": "T", "limiting": "Tsharp"}[kind]
    ld = local_data(p, x)
    n, m = p.n, p.m
    if ybar is not None:
        ybar = np.asarray(ybar, dtype=float).reshape(-1)
        groups = [(ybar[None, :], ybar)]
    else:
        poly = multiplier_polytope(p, x)
        groups = [(_multiplier_grid(f, y_step, box), f.point) for f in faces(poly)]
    D = sphere_directions(n, dir_res)
    nd = D.shape[0]
    cands = []
    for Y, ref in groups:
        if Y.shape[0] == 0:
            continue
        members = [gc.tangent_cone_graph(g, gp, tkind).members for g, gp in zip(p.g, graph_points(p, ld, ref))]
        Hs = np.array([ld.hess_L(y) for y in Y])
        Hrep = np.repeat(Hs, nd, axis=0)
        DX = np.tile(D, (Y.shape[0], 1))
        for combo in itertools.product(*members):
            res = _branch_residual(Hrep, ld.B, combo, DX)[0]
            for j in np.argsort(res, kind="stable")[:5]:
                cands.append((float(res[j]), Y[j // nd], D[j % nd], combo, Hs[j // nd]))
    if not cands:
        return None
    cands.sort(key=lambda c: c[0])
    best = cands[0]
    if n == 2 and refine:
        for c in cands[:8]:
            r = _refine(c, ld.B, dir_res, refine)
            if r[0] < best[0]:
                best = r
    if best[0] > tol:
        return None
    r, y, dx, combo, H = best
    dy = _recover_dy(H, ld.B, combo, dx)
    return GridWitness(np.array(y), np.array(dx), dy, r)


def _perimeter(theta):
    """Map theta in [0, 8) onto the boundary of the unit square (counter-clockwise)."""
    theta = np.mod(theta, 8.0)
    side = np.floor(theta / 2.0)
    s = theta - 2.0 * side - 1.0
    out = np.empty(theta.shape + (2,))
    out[..., 0] = np.select([side == 0, side == 1, side == 2], [1.0, -s, -1.0], s)
    out[..., 1] = np.select([side == 0, side == 1, side == 2], [s, 1.0, -s], -1.0)
    return out


def _theta(d):
    x, y = d
    if x == 1.0:
        return (y + 1.0) % 8.0
    if y == 1.0:
        return 2.0 + (1.0 - x)
    if x == -1.0:
        return 4.0 + (1.0 - y)
    return 6.0 + (x + 1.0)


def _refine(cand, B, spacing, iters):
    """Golden-section search along the square's perimeter around a grid minimiser."""
    r, y, d0, combo, H = cand

    def f(th):
        dd = _perimeter(np.array([th]))
        return float(_branch_residual(H[None], B, combo, dd)[0][0])

    th0 = _theta(d0)
    a, b = th0 - 2 * spacing, th0 + 2 * spacing
    gr = (math.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    th = 0.5 * (a + b)
    val = f(th)
    if val < r:
        return (val, y, _perimeter(np.array([th]))[0], combo, H)
    return cand


def _recover_dy(H, B, combo, dx):
    """The minimising dual direction for a witness (small direct recomputation)."""
    res, fixed, cols, W, PINV = _branch_residual(H[None], B, combo, dx[None])
    r = -(H @ dx + fixed[0] @ B)
    best, s_best = np.inf, np.zeros(W.shape[1])
    for P in PINV:
        s = P @ r
        if all(s[j] >= -1e-12 for j, (_, sg) in enumerate(cols) if sg):
            val = np.linalg.norm(r - W @ s)
            if val < best:
                best, s_best = val, s
    dy = fixed[0].copy()
    for j, (i, sg) in enumerate(cols):
        dy[i] += (sg if sg else 1) * s_best[j]
    return dy


# -- finite differences ----------------------------------------------------------

def fd_check(e: Expr, x, h: float = 1e-5) -> float:
    """Largest relative deviation of the AD gradient and Hessian from central differences.

    The gradient is compared with differences of values, the Hessian with
    differences of the AD gradient.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, g, H = eval012(e, x)
    n = x.size
    g_fd = np.empty(n)
    H_fd = np.empty((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        fp, gp, _ = eval012(e, x + step)
        fm, gm, _ = eval012(e, x - step)
        g_fd[j] = (fp - fm) / (2 * h)
        H_fd[:, j] = (gp - gm) / (2 * h)
    H_fd = 0.5 * (H_fd + H_fd.T)
    err_g = np.abs(g - g_fd).max(initial=0.0) / max(1.0, np.abs(g).max(initial=0.0))
    err_h = np.abs(H - H_fd).max(initial=0.0) / max(1.0, np.abs(H).max(initial=0.0))
    return float(max(err_g, err_h))
