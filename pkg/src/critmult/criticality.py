"""Criticality of multipliers and isolated calmness verdicts.

A multiplier ``y`` of a stationary point ``x`` is critical when the linearized
system

    H dx + B^T dy = 0,   (B_i dx, dy_i) in T_i   for every i

has a solution with ``dx != 0``. Here ``H`` is the Hessian of the Lagrangian,
``B = F'(x)`` and ``T_i`` is the tangent cone to ``gph dg_i`` at
``(F_i(x), y_i)``. Using the limiting tangent cone instead gives strong
(non)criticality. Each ``T_i`` is a union of planar cones, so the system is a
finite family of polyhedral cones and every answer below comes from the LPs
in :func:`critmult.conealg.lp_feasible_nonzero`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from . import gcatalog as gc
from .conealg import PolyhedralCone, exact_default, lp_feasible_nonzero
from .errors import BranchLimitExceeded, CritMultError, NotAMultiplier, NotStationary
from .stationarity import (CompositeProblem, DirectionPD, PointPD, branch_count, check_cq, faces,
                           graph_points, local_data, multiplier_polytope, residual, _snap)

BRANCH_CAP = 2 ** 16
MULTISTARTS = 64
SEARCH_TOL = 1e-8
_KIND = {"graphical": "T", "limiting": "Tsharp"}


@dataclass
class CriticalityVerdict:
    status: str  # Noncritical | Critical | Inconclusive
    kind: str  # graphical | limiting
    proof_path: str
    witness: DirectionPD | None = None
    reason: str | None = None

    @property
    def noncritical(self) -> bool:
        return self.status == "Noncritical"

    def to_dict(self) -> dict:
        return {"status": self.status, "kind": self.kind, "proof_path": self.proof_path,
                "witness": None if self.witness is None else self.witness.to_dict(), "reason": self.reason}


@dataclass
class CriticalWitness:
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray

    def to_dict(self) -> dict:
        return {"y": self.y.tolist(), "dx": self.dx.tolist(), "dy": self.dy.tolist()}


@dataclass
class ICVerdict:
    target: str  # M1-at | M1-around | M-at | M-around
    answer: str  # Yes | No | Inconclusive
    proof_path: str
    witness: dict | None = None
    reason: str | None = None
    assumptions: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"target": self.target, "answer": self.answer, "proof_path": self.proof_path,
               "assumptions": dict(self.assumptions)}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.reason is not None:
            out["reason"] = self.reason
        if self.details:
            out["details"] = self.details
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ICVerdict":
        return cls(d["target"], d["answer"], d["proof_path"], d.get("witness"), d.get("reason"),
                   dict(d.get("assumptions", {})), dict(d.get("details", {})))


def _tangent_kind(kind: str) -> str:
    try:
        return _KIND[kind]
    except KeyError:
        raise ValueError(f"kind must be 'graphical' or 'limiting', got {kind!r}") from None


def _require_multiplier(p, x, ybar, exact):
    ybar = np.asarray(ybar, dtype=float).reshape(-1)
    poly = multiplier_polytope(p, x, exact=exact)
    if poly.empty or not poly.contains(ybar):
        raise NotAMultiplier(f"{ybar.tolist()} is not a multiplier at x")
    return ybar


def _branch_members(p, gps, tkind):
    members = [tuple(gc.tangent_cone_graph(g, gp, tkind).members) for g, gp in zip(p.g, gps)]
    if branch_count(members) > BRANCH_CAP:
        raise BranchLimitExceeded(f"{branch_count(members)} branch tuples exceed {BRANCH_CAP}")
    return members


def _lift_rows(c: PolyhedralCone, first: np.ndarray, second: np.ndarray):
    """Rows of ``{z : (first z, second z) in c}`` for a planar cone ``c``."""
    M = np.vstack([first, second])
    return c.E @ M, c.A @ M


def _branch_rows(B, combo):
    """Equality and inequality rows in (dx, dy) of one branch tuple."""
    m, n = B.shape
    k = n + m
    E, A = [np.zeros((0, k))], [np.zeros((0, k))]
    for i, c in enumerate(combo):
        dy_i = np.zeros(k)
        dy_i[n + i] = 1.0
        Ei, Ai = _lift_rows(c, np.concatenate([B[i], np.zeros(m)]), dy_i)
        E.append(Ei)
        A.append(Ai)
    return np.vstack(E), np.vstack(A)


def _system_cones(H, B, members):
    """Yield the polyhedral pieces of the linearized system in (dx, dy)."""
    n, m = H.shape[0], B.shape[0]
    base = np.hstack([H, B.T])
    for combo in itertools.product(*members):
        E, A = _branch_rows(B, combo)
        yield combo, PolyhedralCone(n + m, np.vstack([base, E]), A)


def _clean(v, tol=1e-14):
    v = np.array(v, dtype=float)
    v[np.abs(v) < tol] = 0.0
    return v + 0.0


def _critical_direction(H, B, members, exact):
    n = H.shape[0]
    for _, cone in _system_cones(H, B, members):
        d = lp_feasible_nonzero(cone, range(n), exact=exact)
        if d is not None:
            return _clean(d[:n]), _clean(d[n:])
    return None


def check_noncritical(p: CompositeProblem, x, ybar, kind: str = "graphical",
                      exact: bool | None = None) -> CriticalityVerdict:
    """Decide (strong) noncriticality of ``ybar`` by branch enumeration."""
    tkind = _tangent_kind(kind)
    ex = exact_default() if exact is None else exact
    ybar = _require_multiplier(p, x, ybar, ex)
    ld = local_data(p, x)
    members = _branch_members(p, graph_points(p, ld, ybar), tkind)
    hit = _critical_direction(ld.hess_L(ybar), ld.B, members, ex)
    if hit is None:
        return CriticalityVerdict("Noncritical", kind, "exact-branch-LP")
    return CriticalityVerdict("Critical", kind, "exact-branch-LP", DirectionPD.primal_dual(*hit))


def check_uniqueness_cond(p: CompositeProblem, x, ybar, kind: str = "graphical",
                          exact: bool | None = None) -> tuple[bool, np.ndarray | None]:
    """Does ``B^T dy = 0`` with ``(0, dy_i)`` tangent to every graph force ``dy = 0``?"""
    tkind = _tangent_kind(kind)
    ex = exact_default() if exact is None else exact
    ybar = _require_multiplier(p, x, ybar, ex)
    m = p.m
    if m == 0:
        return True, None
    ld = local_data(p, x)
    members = _branch_members(p, graph_points(p, ld, ybar), tkind)
    zero = np.zeros(m)
    for combo in itertools.product(*members):
        E, A = [ld.B.T], []
        for i, c in enumerate(combo):
            Ei, Ai = _lift_rows(c, zero, np.eye(m)[i])
            E.append(Ei)
            A.append(Ai)
        cone = PolyhedralCone(m, np.vstack(E), np.vstack(A))
        d = lp_feasible_nonzero(cone, range(m), exact=ex)
        if d is not None:
            return False, _clean(d)
    return True, None


def _assumptions(p, x, exact, y=None):
    try:
        cq, _ = check_cq(p, x, exact)
    except CritMultError:  # outside the domain: reported, never relied upon
        cq = False
    out = {"cq": bool(cq), "polyhedral_ic_star_automatic": bool(p.convex)}
    if y is not None:
        out["strict_complementarity"] = strictly_complementary(p, x, y)
    return out


def strictly_complementary(p: CompositeProblem, x, y) -> bool:
    """True when no coordinate of (F(x), y) sits at a corner of its graph."""
    ld = local_data(p, x)
    for g, gp in zip(p.g, graph_points(p, ld, y)):
        act = [j for j in gc.active_pieces(g, gp) if not gc.graph_pieces(g)[j].degenerate]
        if len(act) > 1:
            return False
    return True


def verdict_ic_M1(p: CompositeProblem, x, ybar, mode: str = "at", exact: bool | None = None) -> ICVerdict:
    """Isolated calmness of M1 at (around) the point: noncriticality plus the uniqueness condition."""
    kind = _mode_kind(mode)
    nc = check_noncritical(p, x, ybar, kind, exact)
    uq, dy = check_uniqueness_cond(p, x, ybar, kind, exact)
    target = f"M1-{mode}"
    assumptions = _assumptions(p, x, exact, np.asarray(ybar, dtype=float))
    details = {"noncritical": nc.noncritical, "uniqueness": uq}
    if nc.noncritical and uq:
        return ICVerdict(target, "Yes", "exact-branch-LP", assumptions=assumptions, details=details)
    if not nc.noncritical:
        w = nc.witness.to_dict()
        reason = f"{'strongly ' if kind == 'limiting' else ''}critical multiplier"
    else:
        w = DirectionPD.primal_dual(np.zeros(p.n), dy).to_dict()
        reason = "multiplier uniqueness condition fails"
    return ICVerdict(target, "No", "exact-branch-LP", w, reason, assumptions, details)


def _mode_kind(mode):
    if mode == "at":
        return "graphical"
    if mode == "around":
        return "limiting"
    raise ValueError(f"mode must be 'at' or 'around', got {mode!r}")


# -- search over the multiplier polytope ---------------------------------------------

@dataclass
class SearchResult:
    witness: CriticalWitness | None
    proof_path: str
    faces_checked: int = 0


def _face_hessian_directions(ld, Z):
    """dH/dt_j along each face direction, snapped."""
    if Z.shape[1] == 0:
        return []
    return [_snap(np.tensordot(Z[:, j], ld.hess_F, axes=1)) for j in range(Z.shape[1])]


def _rational(t, tol=1e-10):
    q = float(Fraction(t).limit_denominator(1000))
    return q if abs(q - t) <= tol * max(1.0, abs(t)) else t


def _pencil_roots(K0, K1, rng):
    """Real t where ``K0 + t K1`` loses rank (a superset, via random square sections)."""
    rows, cols = K0.shape
    if rows == 0 or not np.any(K1):
        return []
    t_probe = rng.uniform(-2.0, 2.0)
    rg = np.linalg.matrix_rank(K0 + t_probe * K1, tol=1e-10)
    if rg == 0:
        return []
    W = rng.standard_normal((rg, rows))
    V = rng.standard_normal((cols, rg)) if rg < cols else np.eye(cols)
    A0, A1 = W @ K0 @ V, W @ K1 @ V
    try:
        vals = scipy.linalg.eigvals(A0, -A1)
    except (np.linalg.LinAlgError, ValueError):
        return []
    out = []
    for z in vals:
        if np.isfinite(z) and abs(z.imag) <= 1e-8 * max(1.0, abs(z.real)):
            out.append(_rational(float(z.real)))
    return out


def _samples(cands, t_lo, t_hi):
    inside = sorted({t for t in cands if t_lo < t < t_hi})
    pts = list(inside)
    edges = [t_lo] + inside + [t_hi]
    for a, b in zip(edges, edges[1:]):
        if math.isinf(a) and math.isinf(b):
            pts.append(0.0)
        elif math.isinf(a):
            pts.append(b - 1.0)
        elif math.isinf(b):
            pts.append(a + 1.0)
        else:
            pts.append(0.5 * (a + b))
    return sorted(set(pts))


def _segment_face(p, ld, face, members, Hdir, exact, rng):
    """Exact decision on a one-dimensional face with H affine along it."""
    n, m = p.n, p.m
    z = face.Z[:, 0]
    t_lo, t_hi = face.interval(z)
    H0 = ld.hess_L(face.point)
    K1 = np.hstack([Hdir, np.zeros((n, m))])
    cands = []
    base = np.hstack([H0, ld.B.T])
    for combo in itertools.product(*members):
        E, A = _branch_rows(ld.B, combo)
        for size in range(min(A.shape[0], 10) + 1):
            for S in itertools.combinations(range(A.shape[0]), size):
                K0 = np.vstack([base, E, A[list(S)]])
                K1s = np.vstack([K1, np.zeros((E.shape[0] + size, n + m))])
                cands.extend(_pencil_roots(K0, K1s, rng))
    for t in _samples(cands, t_lo, t_hi):
        y = face.point + t * z
        hit = _critical_direction(ld.hess_L(y), ld.B, members, exact)
        if hit is not None:
            return CriticalWitness(_clean(y), *hit)
    return None


def _heuristic_face(p, ld, face, members, Hdirs, exact, rng, starts):
    """Multistart alternating minimisation on a face where H varies in several directions."""
    n, m = p.n, p.m
    Z = face.Z
    for _ in range(starts):
        c = rng.uniform(-1.0, 1.0, Z.shape[1])
        y = _clip_to_face(face, face.point + Z @ c)
        for _ in range(30):
            best = None
            for _, cone in _system_cones(ld.hess_L(y), ld.B, members):
                if cone.E.shape[0] == 0:
                    continue
                _, s, vt = np.linalg.svd(cone.E)
                vec = vt[-1]
                sig = s[-1] if s.size == n + m else 0.0
                if np.abs(vec[:n]).max() > 1e-6 and (best is None or sig < best[0]):
                    best = (sig, vec / np.abs(vec[:n]).max())
            if best is None:
                break
            dx, dy = best[1][:n], best[1][n:]
            r0 = ld.hess_L(y) @ dx + ld.B.T @ dy
            G = np.column_stack([Hd @ dx for Hd in Hdirs])
            step = np.linalg.lstsq(G, -r0, rcond=None)[0]
            y = _clip_to_face(face, y + Z @ step)
            if best[0] <= SEARCH_TOL:
                break
        hit = _critical_direction(ld.hess_L(y), ld.B, members, exact)
        if hit is not None:
            return CriticalWitness(_clean(y), *hit)
    return None


def _clip_to_face(face, y):
    """Pull y back toward the relative interior point until it is inside the face."""
    d = y - face.point
    if not np.any(d):
        return y
    t_lo, t_hi = face.interval(d)
    t = min(1.0, 0.999 * t_hi) if t_hi > 0 else 0.0
    return face.point + t * d


def search_critical_multiplier(p: CompositeProblem, x, kind: str = "graphical", budget: int = MULTISTARTS,
                               seed: int = 0, exact: bool | None = None) -> SearchResult:
    """Look for a (strongly) critical multiplier face by face.

    Faces where the Hessian of the Lagrangian does not move are decided by
    one LP family; one-dimensional faces with an affine Hessian are decided by
    checking the finitely many parameters where the branch systems change
    rank plus one point per interval between them. Other faces fall back to a
    seeded multistart search, and a negative answer there is not a proof.
    """
    tkind = _tangent_kind(kind)
    ex = exact_default() if exact is None else exact
    poly = multiplier_polytope(p, x, exact=ex)
    if poly.empty:
        raise NotStationary("x has no multiplier")
    ld = local_data(p, x)
    rng = np.random.default_rng(seed)
    path = "exact-constant-H"
    flist = faces(poly, ex)
    for count, face in enumerate(flist, 1):
        members = _branch_members(p, graph_points(p, ld, face.point), tkind)
        Hdirs = _face_hessian_directions(ld, face.Z)
        moving = [j for j, Hd in enumerate(Hdirs) if np.any(Hd)]
        if not moving:
            hit = _critical_direction(ld.hess_L(face.point), ld.B, members, ex)
            if hit is not None:
                return SearchResult(CriticalWitness(_clean(face.point), *hit), "exact-constant-H", count)
            continue
        if face.dim == 1:
            path = "exact-branch-LP" if path != "heuristic-search" else path
            w = _segment_face(p, ld, face, members, Hdirs[0], ex, rng)
            if w is not None:
                return SearchResult(w, "exact-branch-LP", count)
            continue
        path = "heuristic-search"
        w = _heuristic_face(p, ld, face, members, Hdirs, ex, rng, budget)
        if w is not None:
            return SearchResult(w, "heuristic-search", count)
    return SearchResult(None, path, len(flist))


def verdict_ic_M(p: CompositeProblem, x, mode: str = "at", budget: int = MULTISTARTS, seed: int = 0,
                 exact: bool | None = None) -> ICVerdict:
    """Isolated calmness of the primal mapping M at (around) the stationary point."""
    kind = _mode_kind(mode)
    target = f"M-{mode}"
    ex = exact_default() if exact is None else exact
    poly = multiplier_polytope(p, x, exact=ex)
    if poly.empty:
        raise NotStationary("x is not stationary for (v, u) = (0, 0)")
    if not p.convex:
        return ICVerdict(target, "Inconclusive", "none", reason="nonconvex l0 piece: convexity of g is required",
                         assumptions={"cq": None, "polyhedral_ic_star_automatic": False})
    flist = faces(poly, ex)
    top = max(flist, key=lambda f: f.dim)
    assumptions = _assumptions(p, x, ex, top.point)
    res = search_critical_multiplier(p, x, kind, budget, seed, ex)
    if res.witness is not None:
        return ICVerdict(target, "No", res.proof_path, res.witness.to_dict(),
                         f"{'strongly ' if kind == 'limiting' else ''}critical multiplier found", assumptions)
    exact_path = res.proof_path != "heuristic-search"
    if not assumptions["cq"]:
        return ICVerdict(target, "Inconclusive", res.proof_path,
                         reason="qualification condition fails; only the necessary condition was checked",
                         assumptions=assumptions)
    if not exact_path:
        return ICVerdict(target, "Inconclusive", res.proof_path,
                         reason="no critical multiplier found, but the search was heuristic", assumptions=assumptions)
    if mode == "at":
        return ICVerdict(target, "Yes", res.proof_path, assumptions=assumptions)
    uniq = [check_uniqueness_cond(p, x, f.point, "limiting", ex)[0] for f in flist]
    details = {"strongly_noncritical": True, "limiting_uniqueness_per_face": uniq}
    if all(uniq):
        return ICVerdict(target, "Yes", res.proof_path, assumptions=assumptions, details=details)
    return ICVerdict(target, "Inconclusive", res.proof_path,
                     reason="all multipliers strongly noncritical, but the limiting uniqueness condition fails",
                     assumptions=assumptions, details=details)


def check_aubin_M1(p: CompositeProblem, x, ybar, exact: bool | None = None) -> bool:
    """Mordukhovich criterion for M1 with the zero normal in the (x, y) slot."""
    ex = exact_default() if exact is None else exact
    ybar = _require_multiplier(p, x, ybar, ex)
    ld = local_data(p, x)
    n, m = p.n, p.m
    k = n + m
    H = ld.hess_L(ybar)
    base = np.hstack([H, -ld.B.T])  # unknowns (eta_v, eta_u)
    normals = [tuple(gc.limiting_normal_graph(g, gp).members) for g, gp in zip(p.g, graph_points(p, ld, ybar))]
    if branch_count(normals) > BRANCH_CAP:
        raise BranchLimitExceeded("too many normal-cone branches")
    for combo in itertools.product(*normals):
        E, A = [base], []
        for i, c in enumerate(combo):
            eu = np.zeros(k)
            eu[n + i] = 1.0
            Ei, Ai = _lift_rows(c, eu, np.concatenate([ld.B[i], np.zeros(m)]))
            E.append(Ei)
            A.append(Ai)
        cone = PolyhedralCone(k, np.vstack(E), np.vstack(A) if A else None)
        if lp_feasible_nonzero(cone, range(k), exact=ex) is not None:
            return False
    return True


def witness_residual(p: CompositeProblem, x, y, dx, dy) -> float:
    """Residual of the linearized equation for a candidate witness."""
    ld = local_data(p, x)
    return float(np.linalg.norm(ld.hess_L(y) @ np.asarray(dx, dtype=float) + ld.B.T @ np.asarray(dy, dtype=float)))
