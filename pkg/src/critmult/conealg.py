"""Polyhedral cone algebra.

A :class:`PolyhedralCone` is ``{d : E d = 0, A d <= 0}``; a :class:`ConeUnion`
is a finite union of such cones sharing the dimension. Everything the
verdict logic needs (membership, polars, tangent objects of polyhedra,
nonzero-solution feasibility) is decided here with the simplex in
:mod:`critmult.simplex`.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import BranchLimitExceeded, DimensionMismatch, NotInSet
from .simplex import linprog

TOL = 1e-9
ACTIVE_SET_CAP = 16

_EXACT_DEFAULT = os.environ.get("CRITMULT_EXACT_LP", "0") == "1"


def set_exact_default(flag: bool) -> None:
    """Toggle exact rational LPs for calls that do not pass ``exact``."""
    global _EXACT_DEFAULT
    _EXACT_DEFAULT = bool(flag)


def exact_default() -> bool:
    return _EXACT_DEFAULT


def _rows(M, k):
    if M is None:
        return np.zeros((0, k))
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, k))
    return M.reshape(-1, k)


def _canonical_rows(M: np.ndarray, symmetric: bool) -> np.ndarray:
    out = []
    for row in M:
        scale = np.abs(row).max()
        if scale == 0.0:
            continue
        r = row / scale
        if symmetric:
            # fix the sign of the first nonzero entry
            nz = np.flatnonzero(r)[0]
            if r[nz] < 0:
                r = -r
        r = r + 0.0  # drop negative zeros
        if not any(np.array_equal(r, q) for q in out):
            out.append(r)
    return np.array(out).reshape(-1, M.shape[1])


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """``{d in R^k : E d = 0, A d <= 0}`` with duplicate and zero rows removed."""

    k: int
    E: np.ndarray
    A: np.ndarray

    def __init__(self, k: int, E=None, A=None):
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "E", _canonical_rows(_rows(E, k), True))
        object.__setattr__(self, "A", _canonical_rows(_rows(A, k), False))

    @classmethod
    def full(cls, k: int) -> "PolyhedralCone":
        return cls(k)

    @classmethod
    def zero(cls, k: int) -> "PolyhedralCone":
        return cls(k, E=np.eye(k))

    def contains(self, d, tol: float = TOL) -> bool:
        return member(ConeUnion(self.k, (self,)), d, tol)

    def lift(self, M) -> "PolyhedralCone":
        """Preimage ``{z : M z in self}``."""
        M = np.asarray(M, dtype=float).reshape(self.k, -1)
        return PolyhedralCone(M.shape[1], self.E @ M, self.A @ M)

    def intersect(self, other: "PolyhedralCone") -> "PolyhedralCone":
        _check_dim(self.k, other.k)
        return PolyhedralCone(self.k, np.vstack([self.E, other.E]), np.vstack([self.A, other.A]))

    def __repr__(self):
        return f"PolyhedralCone(k={self.k}, E={self.E.tolist()}, A={self.A.tolist()})"


@dataclass(frozen=True)
class ConeUnion:
    k: int
    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.members:
            raise ValueError("a ConeUnion needs at least one member")
        for c in self.members:
            _check_dim(self.k, c.k)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def contains(self, d, tol: float = TOL) -> bool:
        return member(self, d, tol)

    def stacked(self):
        """Row-stacked data for the membership kernel."""
        k = self.k
        Es = [c.E for c in self.members]
        As = [c.A for c in self.members]
        eoff = np.concatenate([[0], np.cumsum([e.shape[0] for e in Es])]).astype(np.int64)
        aoff = np.concatenate([[0], np.cumsum([a.shape[0] for a in As])]).astype(np.int64)
        E = np.vstack(Es) if eoff[-1] else np.zeros((0, k))
        A = np.vstack(As) if aoff[-1] else np.zeros((0, k))
        return E, np.zeros(E.shape[0]), A, np.zeros(A.shape[0]), eoff, aoff


def _check_dim(k1, k2):
    if k1 != k2:
        raise DimensionMismatch(f"dimension {k1} != {k2}")


def member(u: ConeUnion | PolyhedralCone, d, tol: float = TOL) -> bool:
    if isinstance(u, PolyhedralCone):
        u = ConeUnion(u.k, (u,))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    _check_dim(u.k, d.size)
    return bool(member_batch(u, d.reshape(1, -1), tol)[0])


def member_batch(u: ConeUnion, D, tol: float = TOL) -> np.ndarray:
    D = np.ascontiguousarray(np.asarray(D, dtype=float).reshape(-1, u.k))
    E, e, A, b, eoff, aoff = u.stacked()
    return _kernels.union_member(E, e, A, b, eoff, aoff, D, tol)


def product(*unions: ConeUnion) -> ConeUnion:
    """Cartesian product of cone unions (members combined lexicographically)."""
    k = sum(u.k for u in unions)
    members = []
    for combo in itertools.product(*(u.members for u in unions)):
        E = scipy.linalg.block_diag(*[c.E for c in combo]) if combo else np.zeros((0, 0))
        A = scipy.linalg.block_diag(*[c.A for c in combo]) if combo else np.zeros((0, 0))
        members.append(PolyhedralCone(k, E.reshape(-1, k), A.reshape(-1, k)))
    return ConeUnion(k, tuple(members))


# -- polyhedra ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{z : A z <= b, E z = e}``."""

    A: np.ndarray
    b: np.ndarray
    E: np.ndarray | None = None
    e: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))
        k = A.shape[1]
        object.__setattr__(self, "E", _rows(self.E, k))
        object.__setattr__(self, "e", np.zeros(0) if self.e is None else np.asarray(self.e, dtype=float).reshape(-1))

    @property
    def k(self) -> int:
        return self.A.shape[1]

    def contains(self, z, tol: float = TOL) -> bool:
        z = np.asarray(z, dtype=float)
        scale = max(1.0, np.abs(z).max(initial=0.0))
        ok = np.all(self.A @ z - self.b <= tol * scale)
        if self.E.shape[0]:
            ok &= np.all(np.abs(self.E @ z - self.e) <= tol * scale)
        return bool(ok)

    def contains_batch(self, Z, tol: float = TOL) -> np.ndarray:
        Z = np.ascontiguousarray(np.asarray(Z, dtype=float).reshape(-1, self.k))
        eoff = np.array([0, self.E.shape[0]], dtype=np.int64)
        aoff = np.array([0, self.A.shape[0]], dtype=np.int64)
        return _kernels.union_member(self.E, self.e, self.A, self.b, eoff, aoff, Z, tol)


def _active_rows(P: Polyhedron, x, tol):
    x = np.asarray(x, dtype=float)
    if x.shape != (P.k,):
        raise DimensionMismatch(f"point has shape {x.shape}, polyhedron lives in R^{P.k}")
    if not P.contains(x, tol):
        raise NotInSet("point is not in the polyhedron")
    scale = max(1.0, np.abs(x).max(initial=0.0))
    slack = P.b - P.A @ x
    return np.flatnonzero(np.abs(slack) <= tol * scale)


def tangent_polyhedron(P: Polyhedron, x, tol: float = TOL) -> PolyhedralCone:
    act = _active_rows(P, x, tol)
    return PolyhedralCone(P.k, P.E, P.A[act])


def limiting_tangent_polyhedron(P: Polyhedron, x, tol: float = TOL, exact: bool | None = None) -> ConeUnion:
    """Union of the tangent cones of P at nearby points on the relative boundary.

    Every nonempty activity pattern J of the rows active at x contributes the
    cone ``{E d = 0, A_J d <= 0}``. The pattern of the relative interior of P
    only contributes when x itself lies in the relative interior, so for
    ``R^2_-`` at the origin the result is ``{d : min(d1, d2) <= 0}``.
    """
    act = _active_rows(P, x, tol)
    if len(act) > ACTIVE_SET_CAP:
        raise BranchLimitExceeded(f"{len(act)} active rows exceed the cap {ACTIVE_SET_CAP}")
    k = P.k
    realized = []
    for size in range(len(act) + 1):
        for J in itertools.combinations(act, size):
            rest = [j for j in act if j not in J]
            if _pattern_realized(P, list(J), rest, exact):
                realized.append(list(J))
    if not realized:  # cannot happen for x in P
        raise NotInSet("no activity pattern realized")
    minimal = realized[0]
    members = []
    for J in realized:
        if J == minimal and len(J) < len(act):
            continue
        members.append(PolyhedralCone(k, P.E, P.A[J]))
    return ConeUnion(k, tuple(_prune(members)))


def _prune(members):
    """Drop members contained in another member (the first of equal members is kept)."""
    keep = []
    for i, c in enumerate(members):
        dominated = any(j != i and cone_subset(c, d) and (j < i or not cone_subset(d, c))
                        for j, d in enumerate(members))
        if not dominated:
            keep.append(c)
    return keep


def _pattern_realized(P, J, rest, exact):
    """Is there d with E d = 0, A_J d = 0 and A_rest d < 0 (strictly)?"""
    if not rest:
        return True
    k = P.k
    # variables (d, s): maximise s with A_rest d + s <= 0, s <= 1, |d| <= 1
    A_ub = np.hstack([P.A[rest], np.ones((len(rest), 1))])
    A_eq = np.vstack([np.hstack([P.E, np.zeros((P.E.shape[0], 1))]),
                      np.hstack([P.A[J].reshape(-1, k), np.zeros((len(J), 1))])])
    c = np.zeros(k + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub, np.zeros(len(rest)), A_eq, np.zeros(A_eq.shape[0]),
                  bounds=[(-1, 1)] * k + [(None, 1)], exact=_exact(exact))
    return res.status == "optimal" and res.fun > TOL


def _exact(exact):
    return _EXACT_DEFAULT if exact is None else exact


# -- generators and polars ---------------------------------------------------

def _null_space(M, k, tol=1e-10):
    if M.shape[0] == 0:
        return np.eye(k)
    return scipy.linalg.null_space(M, rcond=tol)


def generators(c: PolyhedralCone, tol: float = 1e-9):
    """Extreme rays and a lineality basis: ``c = cone(rays) + span(lineality)``.

    Rays are found by enumerating (dim - 1)-subsets of inequality rows of the
    pointed part; fine at desk scale.
    """
    k = c.k
    L = _null_space(np.vstack([c.E, c.A]), k)  # lineality, columns
    # ambient space of the pointed part: null(E) intersected with L-perp
    W = _null_space(np.vstack([c.E, L.T]), k)
    dd = W.shape[1]
    rays = []
    if dd:
        Ar = c.A @ W
        keep = np.abs(Ar).max(axis=1) > tol if Ar.size else np.zeros(0, dtype=bool)
        Ar = Ar[keep]
        if dd == 1:
            cands = [np.array([1.0]), np.array([-1.0])]
        else:
            cands = []
            for rows in itertools.combinations(range(Ar.shape[0]), dd - 1):
                N = _null_space(Ar[list(rows)], dd)
                if N.shape[1] == 1:
                    cands.extend([N[:, 0], -N[:, 0]])
        for w in cands:
            if Ar.shape[0] == 0 or np.all(Ar @ w <= tol * np.abs(w).max()):
                r = W @ w
                r = r / np.abs(r).max()
                r[np.abs(r) < 1e-14] = 0.0
                if not any(np.allclose(r, q, atol=1e-9) for q in rays):
                    rays.append(r)
    return np.array(rays).reshape(-1, k), L.T.copy()


def polar(c: PolyhedralCone) -> PolyhedralCone:
    """``{eta : eta . d <= 0 for all d in c}``: rays become inequalities, lineality equalities."""
    rays, lin = generators(c)
    return PolyhedralCone(c.k, lin, rays)


def polar_of_union(u: ConeUnion) -> PolyhedralCone:
    """The polar of a union is the intersection of the member polars."""
    out = polar(u.members[0])
    for c in u.members[1:]:
        out = out.intersect(polar(c))
    return out


def cone_subset(c1: PolyhedralCone, c2: PolyhedralCone | ConeUnion, tol: float = 1e-8) -> bool:
    """Generator test for c1 contained in c2 (exact when c2 is a single convex cone)."""
    rays, lin = generators(c1)
    gens = list(rays) + list(lin) + [-v for v in lin]
    return all(member(c2, g, tol) for g in gens)


# -- nonzero feasibility -----------------------------------------------------

def lp_feasible_nonzero(c: PolyhedralCone, coords, tol: float = TOL, exact: bool | None = None):
    """A d in c whose ``coords`` subvector is nonzero, or None.

    Runs up to 2|coords| LPs maximising +/- d_j over c within the unit box and
    stops at the first optimum above ``tol``. The witness is rescaled so the
    coords subvector has sup-norm 1.
    """
    coords = sorted(set(int(j) for j in coords))
    if not coords:
        raise ValueError("coords must be nonempty")
    if coords[0] < 0 or coords[-1] >= c.k:
        raise DimensionMismatch("coordinate index out of range")
    k = c.k
    ex = _exact(exact)
    for j in coords:
        for sign in (1.0, -1.0):
            obj = np.zeros(k)
            obj[j] = sign
            res = linprog(obj, c.A if c.A.shape[0] else None, np.zeros(c.A.shape[0]) if c.A.shape[0] else None,
                          c.E if c.E.shape[0] else None, np.zeros(c.E.shape[0]) if c.E.shape[0] else None,
                          bounds=[(-1.0, 1.0)] * k, exact=ex)
            if res.status == "optimal" and res.fun > tol:
                d = res.x
                return d / np.abs(d[coords]).max()
    return None
