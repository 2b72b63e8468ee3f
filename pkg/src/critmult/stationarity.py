"""Composite problems ``f0(x) + g(F(x) + u) - <v, x>`` and their stationarity objects.

The perturbed stationarity system reads ``grad_x L(x, y) = v`` and
``y in dg(F(x) + u)`` with ``L(x, y) = f0(x) + y^T F(x)``. This module holds
the problem model, residuals of that system, the multiplier polytope and its
faces, the qualification condition, and tangent tests for the graphs of the
solution mappings M1 (primal-dual), M (primal) and M2 (primal plus
shifted inner value).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import gcatalog as gc
from .conealg import (ConeUnion, PolyhedralCone, TOL, exact_default, generators,
                      lp_feasible_nonzero)
from .errors import (BranchLimitExceeded, DimensionMismatch, NotInDomain, NotStationary,
                     VertexEnumerationLimit)
from .simplex import linprog
from .smoothfn import Expr, constant, eval012, jacobian_data, lagrangian_xderivs, parse_expr

STAT_TOL = 1e-8
VERTEX_M_CAP = 12
FACE_CAP = 2 ** 16
SNAP = 1e-12


@dataclass(frozen=True)
class CompositeProblem:
    n: int
    m: int
    f0: Expr
    F: tuple
    g: tuple

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(self.F))
        object.__setattr__(self, "g", tuple(self.g))
        if len(self.F) != self.m or len(self.g) != self.m:
            raise DimensionMismatch(f"m={self.m} but got {len(self.F)} components and {len(self.g)} pieces")
        for e in (self.f0, *self.F):
            if e.n != self.n:
                raise DimensionMismatch(f"expression in {e.n} variables, problem has n={self.n}")

    @classmethod
    def from_strings(cls, n: int, f0: str, F: list[str], g: list) -> "CompositeProblem":
        pieces = [p if isinstance(p, gc.GPiece) else gc.GPiece.from_dict(p) for p in g]
        return cls(n, len(F), parse_expr(f0, n), tuple(parse_expr(s, n) for s in F), tuple(pieces))

    @property
    def convex(self) -> bool:
        return not any(p.nonconvex for p in self.g)

    @property
    def equality_only(self) -> bool:
        return all(p.kind == "zero" for p in self.g)


@dataclass(frozen=True, eq=False)
class PointPD:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))


@dataclass(frozen=True, eq=False)
class Params:
    v: np.ndarray | None = None
    u: np.ndarray | None = None

    def resolved(self, p: CompositeProblem) -> tuple[np.ndarray, np.ndarray]:
        v = np.zeros(p.n) if self.v is None else np.asarray(self.v, dtype=float).reshape(-1)
        u = np.zeros(p.m) if self.u is None else np.asarray(self.u, dtype=float).reshape(-1)
        if v.shape != (p.n,) or u.shape != (p.m,):
            raise DimensionMismatch("parameter dimensions do not match the problem")
        return v, u


@dataclass(frozen=True, eq=False)
class DirectionPD:
    dv: np.ndarray
    du: np.ndarray
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        for name in ("dv", "du", "dx", "dy"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))

    @classmethod
    def primal_dual(cls, dx, dy) -> "DirectionPD":
        dx = np.asarray(dx, dtype=float).reshape(-1)
        dy = np.asarray(dy, dtype=float).reshape(-1)
        return cls(np.zeros(dx.size), np.zeros(dy.size), dx, dy)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("dv", "du", "dx", "dy")}


def _point(p, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (p.n,):
        raise DimensionMismatch(f"x must have length {p.n}, got shape {x.shape}")
    return x


def _snap(M, tol=SNAP):
    M = np.array(M, dtype=float)
    scale = max(1.0, np.abs(M).max(initial=0.0))
    M[np.abs(M) <= tol * scale] = 0.0
    return M


@dataclass(frozen=True, eq=False)
class LocalData:
    """First and second order data of a problem at x (entries near zero snapped)."""

    x: np.ndarray
    w: np.ndarray  # F(x) + u, snapped onto kinks
    grad_f0: np.ndarray
    hess_f0: np.ndarray
    B: np.ndarray  # F'(x)
    hess_F: np.ndarray  # (m, n, n)

    def hess_L(self, y) -> np.ndarray:
        H = self.hess_f0 + np.tensordot(np.asarray(y, dtype=float), self.hess_F, axes=1) if len(self.w) else self.hess_f0
        return _snap(H)

    def grad_L(self, y) -> np.ndarray:
        return self.grad_f0 + self.B.T @ np.asarray(y, dtype=float)


def local_data(p: CompositeProblem, x, prm: Params | None = None) -> LocalData:
    x = _point(p, x)
    _, u = (prm or Params()).resolved(p)
    _, gf, hf = eval012(p.f0, x)
    if p.m:
        vals, B, HF = jacobian_data(list(p.F), x)
    else:
        vals, B, HF = np.zeros(0), np.zeros((0, p.n)), np.zeros((0, p.n, p.n))
    w = np.array([gc.snap_w(g, wi) for g, wi in zip(p.g, vals + u)])
    return LocalData(x, w, gf, _snap(hf), _snap(B), HF)


# -- residuals -------------------------------------------------------------------

def residual(p: CompositeProblem, pt: PointPD, prm: Params | None = None) -> tuple[float, float]:
    """(||grad_x L - v||, distance of (F(x)+u, y) to gph dg), the latter aggregated in 2-norm."""
    prm = prm or Params()
    v, u = prm.resolved(p)
    x = _point(p, pt.x)
    if pt.y.shape != (p.m,):
        raise DimensionMismatch(f"y must have length {p.m}")
    grad, _ = lagrangian_xderivs(p, x, pt.y)
    r_grad = float(np.linalg.norm(grad - v))
    if not p.m:
        return r_grad, 0.0
    vals = np.array([eval012(Fi, x)[0] for Fi in p.F]) + u
    dists = [gc.project_graph(g, w, y)[1] for g, w, y in zip(p.g, vals, pt.y)]
    return r_grad, float(np.linalg.norm(dists))


def is_stationary(p, pt, prm=None, tol=STAT_TOL) -> bool:
    return max(residual(p, pt, prm)) <= tol


# -- multiplier polytope ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiplierPolytope:
    """``{y : F'(x)^T y = v - grad f0(x), lo <= y <= hi}``."""

    Bt: np.ndarray  # F'(x)^T, shape (n, m)
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    empty: bool
    bounded: bool
    vertices: np.ndarray | None  # (k, m); None when enumeration was skipped
    rays: np.ndarray  # recession directions (lineality listed with both signs)
    point: np.ndarray | None  # some member, when nonempty

    @property
    def m(self) -> int:
        return self.lo.size

    def contains(self, y, tol: float = 1e-9) -> bool:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape != (self.m,):
            raise DimensionMismatch(f"multiplier must have length {self.m}")
        scale = max(1.0, np.abs(y).max(initial=0.0), np.abs(self.rhs).max(initial=0.0))
        ok = np.all(y >= self.lo - tol * scale) and np.all(y <= self.hi + tol * scale)
        return bool(ok and np.all(np.abs(self.Bt @ y - self.rhs) <= tol * scale))

    def to_dict(self) -> dict:
        return {
            "empty": self.empty,
            "bounded": self.bounded,
            "vertices": None if self.vertices is None else self.vertices.tolist(),
            "rays": self.rays.tolist(),
        }


def _bounds(intervals):
    lo = np.array([iv.lo for iv in intervals], dtype=float)
    hi = np.array([iv.hi for iv in intervals], dtype=float)
    return lo, hi


def _lp_bounds(lo, hi):
    return [(None if math.isinf(a) else a, None if math.isinf(b) else b) for a, b in zip(lo, hi)]


def multiplier_polytope(p: CompositeProblem, x, prm: Params | None = None,
                        exact: bool | None = None) -> MultiplierPolytope:
    prm = prm or Params()
    v, _ = prm.resolved(p)
    ld = local_data(p, x, prm)
    Bt = ld.B.T
    rhs = _snap(v - ld.grad_f0)
    ivs = [gc.subdiff_interval(g, w) for g, w in zip(p.g, ld.w)]
    lo, hi = _bounds(ivs)
    m = p.m
    ex = exact_default() if exact is None else exact
    if any(iv.empty for iv in ivs):
        return MultiplierPolytope(Bt, rhs, lo, hi, True, True, np.zeros((0, m)), np.zeros((0, m)), None)
    if m == 0:
        ok = bool(np.all(np.abs(rhs) <= TOL))
        return MultiplierPolytope(Bt, rhs, lo, hi, not ok, True,
                                  np.zeros((1 if ok else 0, 0)), np.zeros((0, 0)), np.zeros(0) if ok else None)
    res = linprog(np.zeros(m), None, None, Bt, rhs, bounds=_lp_bounds(lo, hi), exact=ex)
    if res.status != "optimal":
        return MultiplierPolytope(Bt, rhs, lo, hi, True, True, np.zeros((0, m)), np.zeros((0, m)), None)
    rec = recession_cone(Bt, lo, hi)
    bounded = lp_feasible_nonzero(rec, range(m), exact=ex) is None
    if bounded:
        rays = np.zeros((0, m))
    else:
        r, lin = generators(rec)
        rays = np.vstack([r, lin, -lin]) if lin.size else r
    vertices = None
    poly = MultiplierPolytope(Bt, rhs, lo, hi, False, bounded, None, rays, res.x)
    if m > VERTEX_M_CAP:
        raise VertexEnumerationLimit(f"vertex enumeration skipped for m={m} > {VERTEX_M_CAP}", poly)
    vertices = _vertices(Bt, rhs, lo, hi)
    return MultiplierPolytope(Bt, rhs, lo, hi, False, bounded, vertices, rays, res.x)


def recession_cone(Bt, lo, hi) -> PolyhedralCone:
    m = lo.size
    E = [Bt] if Bt.size else []
    A = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        fin_lo, fin_hi = math.isfinite(lo[i]), math.isfinite(hi[i])
        if fin_lo and fin_hi:
            E.append(e[None, :])
        elif fin_lo:
            A.append(-e[None, :])
        elif fin_hi:
            A.append(e[None, :])
    return PolyhedralCone(m, np.vstack(E) if E else None, np.vstack(A) if A else None)


def _vertices(Bt, rhs, lo, hi, tol=1e-9):
    """Basis enumeration: fix all but an independent set of columns at finite bounds."""
    n, m = Bt.shape
    out = []
    rank = np.linalg.matrix_rank(Bt) if Bt.size else 0
    choices = []
    for i in range(m):
        opts = []
        if math.isfinite(lo[i]):
            opts.append(lo[i])
        if math.isfinite(hi[i]) and hi[i] != lo[i]:
            opts.append(hi[i])
        choices.append(opts)
    for size in range(0, rank + 1):
        for free in itertools.combinations(range(m), size):
            fixed = [i for i in range(m) if i not in free]
            if any(not choices[i] for i in fixed):
                continue
            Bf = Bt[:, list(free)]
            if size and np.linalg.matrix_rank(Bf) < size:
                continue
            for vals in itertools.product(*(choices[i] for i in fixed)):
                y = np.zeros(m)
                y[fixed] = vals
                r = rhs - Bt[:, fixed] @ np.asarray(vals, dtype=float) if fixed else rhs.copy()
                if size:
                    sol = np.linalg.lstsq(Bf, r, rcond=None)[0]
                    y[list(free)] = sol
                scale = max(1.0, np.abs(y).max())
                if np.any(np.abs(Bt @ y - rhs) > tol * scale):
                    continue
                if np.any(y < lo - tol * scale) or np.any(y > hi + tol * scale):
                    continue
                y = np.clip(y, lo, hi)
                y[np.abs(y) < 1e-14] = 0.0
                if not any(np.allclose(y, q, atol=tol, rtol=0) for q in out):
                    out.append(y)
    out.sort(key=lambda q: tuple(-q))
    return np.array(out).reshape(-1, m)


# -- faces -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Face:
    """A face of the multiplier polytope, identified by which bounds are tight.

    ``pattern[i]`` is ``"lo"``, ``"hi"`` or ``"in"``. ``point`` lies in the
    relative interior and the columns of ``Z`` span the face directions.
    """

    pattern: tuple
    point: np.ndarray
    Z: np.ndarray
    lo: np.ndarray = field(repr=False, default=None)
    hi: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def interval(self, z) -> tuple[float, float]:
        """Range of t with point + t z inside the face, for a face direction z."""
        y = self.point
        t_lo, t_hi = -math.inf, math.inf
        for i, s in enumerate(self.pattern):
            if s != "in" or abs(z[i]) < 1e-14:
                continue
            for bound in (self.lo[i], self.hi[i]):
                if not math.isfinite(bound):
                    continue
                t = (bound - y[i]) / z[i]
                if t > 0:
                    t_hi = min(t_hi, t)
                else:
                    t_lo = max(t_lo, t)
        return t_lo, t_hi


def faces(poly: MultiplierPolytope, exact: bool | None = None, cap: int = FACE_CAP) -> list[Face]:
    """All nonempty faces, each with a relative-interior point.

    Patterns are enumerated over the coordinates with a finite nondegenerate
    bound, so there are at most 3^k candidates; each is checked by one LP.
    """
    if poly.empty:
        return []
    m = poly.m
    lo, hi = poly.lo, poly.hi
    ex = exact_default() if exact is None else exact
    states = []
    for i in range(m):
        s = []
        if lo[i] == hi[i]:
            s = ["lo"]
        else:
            if math.isfinite(lo[i]):
                s.append("lo")
            if math.isfinite(hi[i]):
                s.append("hi")
            s.append("in")
        states.append(s)
    total = 1
    for s in states:
        total *= len(s)
    if total > cap:
        raise BranchLimitExceeded(f"{total} face patterns exceed the cap {cap}")
    out = []
    for pattern in itertools.product(*states):
        pt = _relint_point(poly, pattern, ex)
        if pt is None:
            continue
        fixed = [i for i, s in enumerate(pattern) if s != "in"]
        rows = [poly.Bt] + [np.eye(m)[fixed]] if fixed else [poly.Bt]
        M = np.vstack(rows)
        Z = scipy.linalg.null_space(M, rcond=1e-10) if M.shape[0] else np.eye(m)
        Z[np.abs(Z) < 1e-14] = 0.0
        out.append(Face(tuple(pattern), pt, Z, lo, hi))
    return out


def _relint_point(poly, pattern, exact):
    """Maximise the slack s of the inactive finite bounds; realised iff s > 0."""
    m = poly.m
    lo, hi = poly.lo, poly.hi
    A_ub, b_ub = [], []
    bounds = []
    for i, s in enumerate(pattern):
        if s == "lo":
            bounds.append((lo[i], lo[i]))
        elif s == "hi":
            bounds.append((hi[i], hi[i]))
        else:
            bounds.append((None, None))
            if math.isfinite(lo[i]):  # lo - y + s <= 0
                row = np.zeros(m + 1)
                row[i], row[m] = -1.0, 1.0
                A_ub.append(row)
                b_ub.append(-lo[i])
            if math.isfinite(hi[i]):  # y - hi + s <= 0
                row = np.zeros(m + 1)
                row[i], row[m] = 1.0, 1.0
                A_ub.append(row)
                b_ub.append(hi[i])
    has_slack = bool(A_ub)
    bounds.append((None, 1.0) if has_slack else (0.0, 0.0))
    c = np.zeros(m + 1)
    c[m] = 1.0
    A_eq = np.hstack([poly.Bt, np.zeros((poly.Bt.shape[0], 1))])
    res = linprog(c, np.array(A_ub) if A_ub else None, np.array(b_ub) if b_ub else None,
                  A_eq if A_eq.size else None, poly.rhs if A_eq.size else None, bounds=bounds, exact=exact)
    if res.status != "optimal":
        return None
    if has_slack and res.fun <= TOL:
        return None
    y = res.x[:m].copy()
    y[np.abs(y) < 1e-14] = 0.0
    return y


# -- qualification condition -----------------------------------------------------

def check_cq(p: CompositeProblem, x, exact: bool | None = None) -> tuple[bool, np.ndarray | None]:
    """Does ``F'(x)^T y = 0`` with ``y`` in the horizon subdifferential force ``y = 0``?"""
    ld = local_data(p, x)
    m = p.m
    if m == 0:
        return True, None
    ivs = [gc.horizon_interval(g, w) for g, w in zip(p.g, ld.w)]
    if any(iv.empty for iv in ivs):
        bad = [i for i, iv in enumerate(ivs) if iv.empty]
        raise NotInDomain(f"F(x) is outside dom g in coordinates {bad}")
    lo, hi = _bounds(ivs)
    cone = recession_cone(ld.B.T, lo, hi)
    cert = lp_feasible_nonzero(cone, range(m), exact=exact)
    return cert is None, cert


# -- graph tangents --------------------------------------------------------------

def graph_points(p: CompositeProblem, ld: LocalData, y) -> list[gc.GraphPoint]:
    return [gc.graph_point(g, w, yi, tol=1e-8) for g, w, yi in zip(p.g, ld.w, y)]


def _require_stationary(p, pt, prm, tol):
    r = residual(p, pt, prm)
    if max(r) > tol:
        raise NotStationary(f"residual {r} exceeds {tol}")


def tangent_gph_M1(p: CompositeProblem, pt: PointPD, prm: Params | None, d: DirectionPD,
                   kind: str = "T", tol: float = 1e-9) -> bool:
    """Membership of ((dv, du), (dx, dy)) in the (limiting) tangent cone to gph M1."""
    prm = prm or Params()
    _require_stationary(p, pt, prm, STAT_TOL)
    ld = local_data(p, pt.x, prm)
    H = ld.hess_L(pt.y)
    scale = max(1.0, *(np.abs(a).max(initial=0.0) for a in (d.dv, d.du, d.dx, d.dy)))
    lin = H @ d.dx + ld.B.T @ d.dy - d.dv
    if np.linalg.norm(lin) > tol * scale:
        return False
    a = ld.B @ d.dx + d.du
    for g, gp, ai, bi in zip(p.g, graph_points(p, ld, pt.y), a, d.dy):
        if not gc.tangent_cone_graph(g, gp, kind).contains((ai, bi), tol):
            return False
    return True


def branch_members(p: CompositeProblem, gps, kind: str) -> list[tuple]:
    return [tuple(gc.tangent_cone_graph(g, gp, kind).members) for g, gp in zip(p.g, gps)]


def branch_count(members) -> int:
    total = 1
    for ms in members:
        total *= len(ms)
    return total


def tangent_gph_M(p: CompositeProblem, x, prm: Params | None, dv, du, dx, kind: str = "T",
                  exact: bool | None = None) -> bool:
    """Is ((dv, du), dx) tangent to gph M, as a union over multipliers?

    For each face of the multiplier polytope the multiplier y and the dual
    direction dy enter linearly once dx is fixed, so one LP per branch tuple
    decides the face. This is the union-over-multipliers side of the
    primal criterion; it is an equality whenever g is polyhedral and the
    qualification condition holds.
    """
    prm = prm or Params()
    poly = multiplier_polytope(p, x, prm, exact)
    if poly.empty:
        raise NotStationary("no multiplier at x")
    ld = local_data(p, x, prm)
    dv, du, dx = (np.asarray(a, dtype=float).reshape(-1) for a in (dv, du, dx))
    m, n = p.m, p.n
    ex = exact_default() if exact is None else exact
    Hdx = np.array([Hi @ dx for Hi in ld.hess_F]).T.reshape(n, m)  # column i = hess F_i dx
    base = ld.hess_f0 @ dx - dv
    a = ld.B @ dx + du
    for face in faces(poly, ex):
        gps = graph_points(p, ld, face.point)
        members = branch_members(p, gps, kind)
        for combo in itertools.product(*members):
            # unknowns (y, dy): Hdx y + B^T dy = -base ; y on the face ; (a_i, dy_i) in branch
            E_rows = [np.hstack([Hdx, ld.B.T])]
            e_rhs = [-base]
            A_rows, a_rhs = [], []
            for i, c in enumerate(combo):
                for row in c.E:
                    r = np.zeros(2 * m)
                    r[m + i] = row[1]
                    E_rows.append(r[None, :])
                    e_rhs.append(np.array([-row[0] * a[i]]))
                for row in c.A:
                    r = np.zeros(2 * m)
                    r[m + i] = row[1]
                    A_rows.append(r[None, :])
                    a_rhs.append(np.array([-row[0] * a[i]]))
            E_rows.append(np.hstack([poly.Bt, np.zeros((n, m))]))
            e_rhs.append(poly.rhs)
            bounds = []
            for i, s in enumerate(face.pattern):
                if s == "lo":
                    bounds.append((poly.lo[i], poly.lo[i]))
                elif s == "hi":
                    bounds.append((poly.hi[i], poly.hi[i]))
                else:
                    bounds.append(tuple(None if math.isinf(b) else b for b in (poly.lo[i], poly.hi[i])))
            bounds += [(None, None)] * m
            res = linprog(np.zeros(2 * m), np.vstack(A_rows) if A_rows else None,
                          np.concatenate(a_rhs) if a_rhs else None,
                          np.vstack(E_rows), _snap(np.concatenate(e_rhs)), bounds=bounds, exact=ex)
            if res.status == "optimal":
                return True
    return False


def lift_M_to_M2(p: CompositeProblem, x, dv, du, dx):
    """The coordinate change ((dv, du), dx) -> ((dv, du), (dx, F'(x) dx + du))."""
    ld = local_data(p, x)
    dx = np.asarray(dx, dtype=float).reshape(-1)
    return (np.asarray(dv, dtype=float), np.asarray(du, dtype=float)), (dx, ld.B @ dx + np.asarray(du, dtype=float))


def tangent_gph_M2(p: CompositeProblem, x, prm: Params | None, dv, du, dx, dw, kind: str = "T",
                   exact: bool | None = None, tol: float = 1e-9) -> bool:
    """Tangency to gph M2, whose points are ((v, u), (x, F(x) + u)) for (v, u, x) in gph M."""
    ld = local_data(p, x, prm)
    dx = np.asarray(dx, dtype=float).reshape(-1)
    du = np.asarray(du, dtype=float).reshape(-1)
    dw = np.asarray(dw, dtype=float).reshape(-1)
    scale = max(1.0, np.abs(dw).max(initial=0.0), np.abs(dx).max(initial=0.0))
    if np.linalg.norm(dw - ld.B @ dx - du) > tol * scale:
        return False
    return tangent_gph_M(p, x, prm, dv, du, dx, kind, exact)
