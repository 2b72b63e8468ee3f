"""Catalog of separable pieces g_i and the planar graphs of their subdifferentials.

Every graph ``gph dg_i`` is a finite union of horizontal and vertical lines,
rays and segments. :func:`graph_pieces` lists them in a fixed order: from left
to right along the graph (increasing w, then increasing y), so that for the
monotone kinds the index follows the graph. The l0 kind lists the horizontal
axis before the vertical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .conealg import ConeUnion, PolyhedralCone, polar_of_union
from .errors import NotOnGraph, ProblemFileError, Unsupported

GRAPH_TOL = 1e-10
KINDS = ("zero", "nonpos", "free", "box", "abs", "pwa", "l0")
INF = math.inf


@dataclass(frozen=True)
class GPiece:
    kind: str
    l: float = 0.0
    u: float = 0.0
    alpha: float = 1.0
    breakpoints: tuple = ()
    slopes: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown piece kind {self.kind!r}")
        if self.kind == "box" and not self.l < self.u:
            raise ValueError("box needs l < u")
        if self.kind in ("abs", "l0") and not self.alpha > 0:
            raise ValueError(f"{self.kind} needs alpha > 0")
        if self.kind == "pwa":
            bps = tuple(float(b) for b in self.breakpoints)
            sl = tuple(float(s) for s in self.slopes)
            object.__setattr__(self, "breakpoints", bps)
            object.__setattr__(self, "slopes", sl)
            if len(sl) != len(bps) + 1:
                raise ValueError("pwa needs len(slopes) == len(breakpoints) + 1")
            if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
                raise ValueError("pwa breakpoints must be strictly increasing")
            if any(s2 < s1 for s1, s2 in zip(sl, sl[1:])):
                raise ValueError("pwa slopes must be nondecreasing (convexity)")

    @property
    def nonconvex(self) -> bool:
        return self.kind == "l0"

    @property
    def finite_valued(self) -> bool:
        return self.kind in ("free", "abs", "pwa", "l0")

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "l": self.l, "u": self.u}
        if self.kind in ("abs", "l0"):
            return {"kind": self.kind, "alpha": self.alpha}
        if self.kind == "pwa":
            return {"kind": "pwa", "breakpoints": list(self.breakpoints), "slopes": list(self.slopes)}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "GPiece":
        try:
            kind = d["kind"]
            if kind == "box":
                return cls("box", l=float(d["l"]), u=float(d["u"]))
            if kind in ("abs", "l0"):
                return cls(kind, alpha=float(d.get("alpha", 1.0)))
            if kind == "pwa":
                return cls("pwa", breakpoints=tuple(d["breakpoints"]), slopes=tuple(d["slopes"]))
            return cls(kind)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemFileError(f"invalid g piece {d!r}: {exc}") from exc


def zero():
    return GPiece("zero")


def nonpos():
    return GPiece("nonpos")


def free():
    return GPiece("free")


def box(l, u):
    return GPiece("box", l=float(l), u=float(u))


def abs_(alpha=1.0):
    return GPiece("abs", alpha=float(alpha))


def pwa(breakpoints, slopes):
    return GPiece("pwa", breakpoints=tuple(breakpoints), slopes=tuple(slopes))


def l0(alpha=1.0):
    return GPiece("l0", alpha=float(alpha))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def __contains__(self, t) -> bool:
        return self.lo <= t <= self.hi

    @staticmethod
    def nothing() -> "Interval":
        return Interval(INF, -INF)


def subdiff_interval(piece: GPiece, w: float) -> Interval:
    w = float(w)
    k = piece.kind
    if k == "zero":
        return Interval(-INF, INF) if w == 0.0 else Interval.nothing()
    if k == "nonpos":
        if w < 0.0:
            return Interval(0.0, 0.0)
        return Interval(0.0, INF) if w == 0.0 else Interval.nothing()
    if k == "free":
        return Interval(0.0, 0.0)
    if k == "box":
        if w < piece.l or w > piece.u:
            return Interval.nothing()
        lo = -INF if w == piece.l else 0.0
        hi = INF if w == piece.u else 0.0
        return Interval(lo, hi)
    if k == "abs":
        a = piece.alpha
        if w == 0.0:
            return Interval(-a, a)
        return Interval(a, a) if w > 0 else Interval(-a, -a)
    if k == "pwa":
        bps, sl = piece.breakpoints, piece.slopes
        for j, b in enumerate(bps):
            if w < b:
                return Interval(sl[j], sl[j])
            if w == b:
                return Interval(sl[j], sl[j + 1])
        return Interval(sl[-1], sl[-1])
    if k == "l0":
        return Interval(-INF, INF) if w == 0.0 else Interval(0.0, 0.0)
    raise ValueError(k)


def horizon_interval(piece: GPiece, w: float) -> Interval:
    """Horizon subdifferential: the normal cone to dom g_i at w (empty outside the domain)."""
    k = piece.kind
    if piece.finite_valued:
        return Interval(0.0, 0.0)
    if k == "zero":
        return Interval(-INF, INF) if w == 0.0 else Interval.nothing()
    if k == "nonpos":
        if w > 0.0:
            return Interval.nothing()
        return Interval(0.0, INF) if w == 0.0 else Interval(0.0, 0.0)
    if k == "box":
        if w < piece.l or w > piece.u:
            return Interval.nothing()
        if w == piece.l:
            return Interval(-INF, 0.0)
        if w == piece.u:
            return Interval(0.0, INF)
        return Interval(0.0, 0.0)
    raise ValueError(k)


# -- graph pieces ------------------------------------------------------------

@dataclass(frozen=True)
class GraphSet:
    """``{base + t * direction : lo <= t <= hi}`` with an axis-aligned unit direction."""

    base: tuple
    direction: tuple
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def point(self, t) -> np.ndarray:
        return np.asarray(self.base) + t * np.asarray(self.direction)

    def param(self, pt) -> float:
        return float(np.dot(np.asarray(pt, dtype=float) - self.base, self.direction))

    def nearest(self, pt):
        t = min(max(self.param(pt), self.lo), self.hi)
        q = self.point(t)
        return q, float(np.linalg.norm(np.asarray(pt, dtype=float) - q)), t

    def contains(self, pt, tol: float = GRAPH_TOL) -> bool:
        pt = np.asarray(pt, dtype=float)
        _, dist, _ = self.nearest(pt)
        return dist <= tol * max(1.0, np.abs(pt).max())

    def describe(self) -> str:
        (bw, by), (dw, dy) = self.base, self.direction
        if self.degenerate:
            return f"point ({bw:g},{by:g})"
        if dw:  # horizontal
            a, b = bw + self.lo, bw + self.hi
            return f"[{a:g},{b:g}]x{{{by:g}}}"
        a, b = by + self.lo, by + self.hi
        return f"{{{bw:g}}}x[{a:g},{b:g}]"


_H = (1.0, 0.0)
_V = (0.0, 1.0)


def graph_pieces(piece: GPiece) -> list[GraphSet]:
    k = piece.kind
    if k == "zero":
        return [GraphSet((0.0, 0.0), _V, -INF, INF)]
    if k == "free":
        return [GraphSet((0.0, 0.0), _H, -INF, INF)]
    if k == "nonpos":
        return [GraphSet((0.0, 0.0), _H, -INF, 0.0), GraphSet((0.0, 0.0), _V, 0.0, INF)]
    if k == "box":
        l, u = piece.l, piece.u
        return [GraphSet((l, 0.0), _V, -INF, 0.0),
                GraphSet((l, 0.0), _H, 0.0, u - l),
                GraphSet((u, 0.0), _V, 0.0, INF)]
    if k == "abs":
        a = piece.alpha
        return [GraphSet((0.0, -a), _H, -INF, 0.0),
                GraphSet((0.0, -a), _V, 0.0, 2 * a),
                GraphSet((0.0, a), _H, 0.0, INF)]
    if k == "pwa":
        return _pwa_pieces(piece.breakpoints, piece.slopes)
    if k == "l0":
        return [GraphSet((0.0, 0.0), _H, -INF, INF), GraphSet((0.0, 0.0), _V, -INF, INF)]
    raise ValueError(k)


def _pwa_pieces(bps, sl):
    # group breakpoints where the slope actually jumps; equal slopes merge
    jumps = [(b, sl[j], sl[j + 1]) for j, b in enumerate(bps) if sl[j + 1] > sl[j]]
    if not jumps:
        return [GraphSet((0.0, sl[0]), _H, -INF, INF)]
    out = []
    prev_b = None
    for b, s_left, s_right in jumps:
        if prev_b is None:
            out.append(GraphSet((b, s_left), _H, -INF, 0.0))
        else:
            out.append(GraphSet((prev_b, s_left), _H, 0.0, b - prev_b))
        out.append(GraphSet((b, s_left), _V, 0.0, s_right - s_left))
        prev_b = b
    out.append(GraphSet((prev_b, jumps[-1][2]), _H, 0.0, INF))
    return out


def graph_arrays(piece: GPiece):
    """Arrays (base, direction, lo, hi) of the pieces, for the distance kernel."""
    gs = graph_pieces(piece)
    base = np.array([g.base for g in gs], dtype=float)
    direc = np.array([g.direction for g in gs], dtype=float)
    lo = np.array([g.lo for g in gs], dtype=float)
    hi = np.array([g.hi for g in gs], dtype=float)
    return base, direc, lo, hi


def graph_distance_batch(piece: GPiece, P) -> np.ndarray:
    P = np.ascontiguousarray(np.asarray(P, dtype=float).reshape(-1, 2))
    return _kernels.segment_distance(*graph_arrays(piece), P)


@dataclass(frozen=True)
class GraphPoint:
    w: float
    y: float
    piece_index: int

    def validate(self, piece: GPiece, tol: float = GRAPH_TOL) -> bool:
        gs = graph_pieces(piece)
        return 0 <= self.piece_index < len(gs) and gs[self.piece_index].contains((self.w, self.y), tol)


def graph_point(piece: GPiece, w: float, y: float, tol: float = GRAPH_TOL) -> GraphPoint:
    """Certify that (w, y) lies on gph dg_i; the certificate is the first piece containing it."""
    for j, g in enumerate(graph_pieces(piece)):
        if g.contains((w, y), tol):
            return GraphPoint(float(w), float(y), j)
    raise NotOnGraph(f"({w}, {y}) is not on the graph of the subdifferential of {piece.kind}")


def _as_graph_point(piece, pt):
    if isinstance(pt, GraphPoint):
        return pt
    w, y = pt
    return graph_point(piece, w, y)


def active_pieces(piece: GPiece, pt, tol: float = GRAPH_TOL) -> list[int]:
    pt = _as_graph_point(piece, pt)
    return [j for j, g in enumerate(graph_pieces(piece)) if g.contains((pt.w, pt.y), tol)]


# -- cones in the plane --------------------------------------------------------

def _line(u) -> PolyhedralCone:
    return PolyhedralCone(2, E=[[-u[1], u[0]]])


def _ray(u) -> PolyhedralCone:
    return PolyhedralCone(2, E=[[-u[1], u[0]]], A=[[-u[0], -u[1]]])


def _dedupe(cones):
    out = []
    for c in cones:
        if not any(np.array_equal(c.E, q.E) and np.array_equal(c.A, q.A) for q in out):
            out.append(c)
    return out


def _local_cone(g: GraphSet, pt, sharp: bool) -> PolyhedralCone:
    if g.degenerate:
        return PolyhedralCone.zero(2)
    if sharp:
        return _line(g.direction)
    t = g.param(pt)
    scale = GRAPH_TOL * max(1.0, abs(t))
    at_lo = math.isfinite(g.lo) and abs(t - g.lo) <= scale
    at_hi = math.isfinite(g.hi) and abs(t - g.hi) <= scale
    if at_lo and at_hi:
        return PolyhedralCone.zero(2)
    if at_lo:
        return _ray(g.direction)
    if at_hi:
        return _ray(tuple(-c for c in g.direction))
    return _line(g.direction)


def tangent_cone_graph(piece: GPiece, pt, kind: str = "T") -> ConeUnion:
    """Tangent (``kind="T"``) or limiting tangent (``kind="Tsharp"``) cone to gph dg_i.

    Both are unions over the graph pieces through the point, so a corner
    contributes one member per adjacent piece, in piece order.
    """
    if kind not in ("T", "Tsharp"):
        raise ValueError(f"kind must be 'T' or 'Tsharp', got {kind!r}")
    pt = _as_graph_point(piece, pt)
    gs = graph_pieces(piece)
    xy = (pt.w, pt.y)
    cones = [_local_cone(gs[j], xy, kind == "Tsharp") for j in active_pieces(piece, pt)]
    return ConeUnion(2, tuple(_dedupe(cones)))


def regular_normal_graph(piece: GPiece, pt) -> PolyhedralCone:
    return polar_of_union(tangent_cone_graph(piece, pt, "T"))


def limiting_normal_graph(piece: GPiece, pt) -> ConeUnion:
    """Regular normal cone at the point plus the normals of every piece through it.

    Near the point the graph is either the point itself or the relative
    interior of one piece through it, where the regular normal cone is the
    orthogonal line of that piece.
    """
    pt = _as_graph_point(piece, pt)
    gs = graph_pieces(piece)
    cones = [regular_normal_graph(piece, pt)]
    for j in active_pieces(piece, pt):
        if not gs[j].degenerate:
            d = gs[j].direction
            cones.append(PolyhedralCone(2, E=[d]))
    return ConeUnion(2, tuple(_dedupe(cones)))


def paratingent_cone_graph(piece: GPiece, pt) -> ConeUnion:
    """Paratingent cone, only for kinds whose graph is a single subspace."""
    pt = _as_graph_point(piece, pt)
    if piece.kind == "zero":
        return ConeUnion(2, (_line(_V),))
    if piece.kind == "free":
        return ConeUnion(2, (_line(_H),))
    raise Unsupported(f"paratingent cone of gph d({piece.kind}) is not a subspace; refusing")


def project_graph(piece: GPiece, w: float, y: float) -> tuple[GraphPoint, float]:
    """Nearest graph point; ties go to the lowest piece index."""
    pt = np.array([w, y], dtype=float)
    best = None
    for j, g in enumerate(graph_pieces(piece)):
        q, dist, _ = g.nearest(pt)
        if best is None or dist < best[2] - 1e-15 * max(1.0, best[2]):
            best = (j, q, dist)
    j, q, dist = best
    return GraphPoint(float(q[0]), float(q[1]), j), dist


def projection_alternatives(piece: GPiece, gp: GraphPoint) -> list[int]:
    """All pieces through a projected point, the chosen one first, then ascending."""
    act = active_pieces(piece, gp)
    return [gp.piece_index] + [j for j in act if j != gp.piece_index]


def kinks(piece: GPiece) -> tuple:
    """Abscissae where dg_i is multivalued or the domain ends."""
    k = piece.kind
    if k in ("zero", "nonpos", "abs", "l0"):
        return (0.0,)
    if k == "box":
        return (piece.l, piece.u)
    if k == "pwa":
        return piece.breakpoints
    return ()


def snap_w(piece: GPiece, w: float, tol: float = GRAPH_TOL) -> float:
    """Move w onto a kink when it is within roundoff of one."""
    w = float(w)
    for c in kinks(piece):
        if abs(w - c) <= tol * max(1.0, abs(c)):
            return float(c)
    return w
