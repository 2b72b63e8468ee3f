"""Semismooth* Newton method for ``(0, 0) in M1^{-1}(x, y)``.

Each iteration first moves to a nearby point of the graph (approximation
step): the pair ``(F_i(x), y_i)`` is projected onto ``gph dg_i`` and the
parameters ``(v, u)`` that make the projected point exact are read off. The
Newton step then linearizes along the graph piece chosen by the projection:

    H dx + B^T dy = -v_hat
    q_i (B_i dx - u_hat_i) - p_i dy_i = 0

where ``(p_i, q_i)`` spans the chosen piece. The new iterate is
``(x + dx, y_hat + dy)``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gcatalog as gc
from .errors import DegenerateBranch, DomainError, SingularA
from .smoothfn import eval012, jacobian_data, lagrangian_xderivs
from .stationarity import CompositeProblem, PointPD, residual

DIVERGE_AT = 1e12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 50
    retry_limit: int = 8
    kappa: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.beta < 1:
            raise ValueError("beta must be at least 1")
        if self.max_iter < 0 or self.retry_limit < 0:
            raise ValueError("max_iter and retry_limit must be nonnegative")

    @property
    def L(self) -> float:
        return self.beta + 1.0

    def C(self, dim: int) -> float:
        return math.sqrt(dim * (1.0 + self.kappa ** 2))


@dataclass(frozen=True)
class BranchSelection:
    pieces: tuple
    directions: tuple  # (p_i, q_i) per coordinate

    def __post_init__(self):
        for p_i, q_i in self.directions:
            if p_i == 0.0 and q_i == 0.0:
                raise DegenerateBranch("branch direction (0, 0)")

    def label(self) -> str:
        return "".join(str(j) for j in self.pieces) if len(self.pieces) < 10 else "-".join(map(str, self.pieces))


@dataclass(frozen=True, eq=False)
class ApproxPoint:
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    u: np.ndarray
    branch: BranchSelection
    shift: float
    alternatives: tuple = ()  # per coordinate, the pieces through the projected point


@dataclass
class IterRecord:
    iter: int
    x: np.ndarray
    y: np.ndarray
    r_grad: float
    r_graph: float
    shift: float = math.nan
    branch: str = ""
    step_norm: float = math.nan
    diag_value: float = math.nan

    @property
    def rho(self) -> float:
        return math.hypot(self.r_grad, self.r_graph)


@dataclass
class SolveTrace:
    method: str
    records: list = field(default_factory=list)
    status: str = "MaxIter"
    message: str = ""

    @property
    def iterations(self) -> int:
        """Newton steps taken."""
        return max(0, len(self.records) - 1)

    @property
    def rho(self) -> np.ndarray:
        return np.array([r.rho for r in self.records])

    @property
    def ratios(self) -> np.ndarray:
        """Residual ratios rho_{k+1} / rho_k."""
        rho = self.rho
        with np.errstate(divide="ignore", invalid="ignore"):
            return rho[1:] / rho[:-1] if rho.size > 1 else np.zeros(0)

    @property
    def step_ratios(self) -> np.ndarray:
        """Ratios of consecutive iterate displacements, the linear rate of (x_k, y_k)."""
        if len(self.records) < 3:
            return np.zeros(0)
        z = np.array([np.concatenate([r.x, r.y]) for r in self.records])
        steps = np.linalg.norm(np.diff(z, axis=0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return steps[1:] / steps[:-1]

    @property
    def order_estimate(self) -> float:
        """log(rho_{k+1}/rho_k) / log(rho_k/rho_{k-1}) over the last three residuals."""
        rho = self.rho
        rho = rho[rho > 0]
        if rho.size < 3:
            return math.nan
        a, b, c = rho[-3:]
        den = math.log(b / a)
        return math.log(c / b) / den if den else math.nan

    @property
    def final(self) -> IterRecord:
        return self.records[-1]

    def summary(self) -> dict:
        r = self.ratios
        s = self.step_ratios
        return {
            "method": self.method,
            "status": self.status,
            "iterations": self.iterations,
            "x": self.final.x.tolist(),
            "y": self.final.y.tolist(),
            "r_grad": self.final.r_grad,
            "r_graph": self.final.r_graph,
            "last_ratio": float(r[-1]) if r.size else None,
            "last_step_ratio": float(s[-1]) if s.size else None,
            "order_estimate": self.order_estimate,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.to_csv(fh)

    def to_csv(self, fh) -> None:
        if not self.records:
            return
        n, m = self.records[0].x.size, self.records[0].y.size
        w = csv.writer(fh)
        w.writerow(["iter", *(f"x{i + 1}" for i in range(n)), *(f"y{i + 1}" for i in range(m)),
                    "r_grad", "r_graph", "shift", "branch", "step_norm", "diag_value"])
        for r in self.records:
            w.writerow([r.iter, *map(repr, r.x.tolist()), *map(repr, r.y.tolist()),
                        repr(r.r_grad), repr(r.r_graph), _fmt(r.shift), r.branch, _fmt(r.step_norm),
                        _fmt(r.diag_value)])


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


# -- the two steps ---------------------------------------------------------------

def approx_step(p: CompositeProblem, x, y) -> ApproxPoint:
    """Project (F(x), y) onto gph dg and read off the parameters of the projected point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    vals = np.array([eval012(Fi, x)[0] for Fi in p.F]) if p.m else np.zeros(0)
    y_hat = np.empty(p.m)
    w_hat = np.empty(p.m)
    pieces, dirs, alts = [], [], []
    for i, g in enumerate(p.g):
        gp, _ = gc.project_graph(g, vals[i], y[i])
        w_hat[i], y_hat[i] = gp.w, gp.y
        pieces.append(gp.piece_index)
        dirs.append(gc.graph_pieces(g)[gp.piece_index].direction)
        alts.append(tuple(gc.projection_alternatives(g, gp)))
    u_hat = w_hat - vals
    v_hat, _ = lagrangian_xderivs(p, x, y_hat)
    shift = float(np.linalg.norm(np.concatenate([y_hat - y, v_hat, u_hat])))
    return ApproxPoint(x, y_hat, v_hat, u_hat, BranchSelection(tuple(pieces), tuple(dirs)), shift, tuple(alts))


def _with_branch(p: CompositeProblem, ap: ApproxPoint, pieces) -> ApproxPoint:
    dirs = tuple(gc.graph_pieces(g)[j].direction for g, j in zip(p.g, pieces))
    return ApproxPoint(ap.x, ap.y, ap.v, ap.u, BranchSelection(tuple(pieces), dirs), ap.shift, ap.alternatives)


def assemble_newton_system(p: CompositeProblem, ap: ApproxPoint) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrix and right side of the branch Newton system in (dx, dy)."""
    _, H = lagrangian_xderivs(p, ap.x, ap.y)
    if p.m:
        _, B, _ = jacobian_data(list(p.F), ap.x)
    else:
        B = np.zeros((0, p.n))
    pq = np.array(ap.branch.directions, dtype=float).reshape(-1, 2)
    pc, qc = pq[:, 0], pq[:, 1]
    A = np.block([[H, B.T], [qc[:, None] * B, -np.diag(pc)]])
    rhs = np.concatenate([-ap.v, qc * ap.u])
    return A, rhs


def _diag_B(ap: ApproxPoint, n: int) -> np.ndarray:
    """The matrix mapping (v_hat, u_hat) to minus the right side."""
    q = np.array([d[1] for d in ap.branch.directions], dtype=float)
    m = q.size
    out = np.zeros((n + m, n + m))
    out[:n, :n] = np.eye(n)
    out[n:, n:] = -np.diag(q)
    return out


def regularity_diagnostic(A, B, kappa: float, n: int | None = None) -> tuple[float, bool]:
    """``||A^{-1}|| ||[A | B]||_F`` and whether it is within ``sqrt(dim (1 + kappa^2))``.

    The bound uses the size of the linear system (``n + m`` for the
    primal-dual unknown); pass ``n`` to override.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[-1] <= s[0] * 1e-15 or s[-1] == 0.0:
        raise SingularA("A is singular")
    value = float(np.linalg.norm(np.hstack([A, B]), "fro") / s[-1])
    dim = A.shape[0] if n is None else n
    return value, value <= math.sqrt(dim * (1.0 + kappa ** 2))


def _solve(A, rhs):
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    return sol if np.all(np.isfinite(sol)) else None


def _record(p, k, x, y):
    try:
        rg, rgr = residual(p, PointPD(x, y))
    except DomainError:
        return None
    return IterRecord(k, x.copy(), y.copy(), rg, rgr)


def _branch_retries(ap: ApproxPoint, limit: int):
    """Alternative piece tuples at corner coordinates, lexicographic, first choice excluded."""
    corners = [i for i, a in enumerate(ap.alternatives) if len(a) > 1]
    if not corners:
        return []
    out = []
    for combo in itertools.product(*(ap.alternatives[i] for i in corners)):
        pieces = list(ap.branch.pieces)
        for i, j in zip(corners, combo):
            pieces[i] = j
        if tuple(pieces) != ap.branch.pieces:
            out.append(tuple(pieces))
        if len(out) >= limit:
            break
    return out


def solve_ge(p: CompositeProblem, x0, y0, opts: SolverOptions | None = None) -> SolveTrace:
    """Run the semismooth* Newton method from (x0, y0)."""
    opts = opts or SolverOptions()
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    y = np.asarray(y0, dtype=float).reshape(-1).copy()
    trace = SolveTrace("ssn")
    for k in range(opts.max_iter + 1):
        rec = _record(p, k, x, y)
        if rec is None:
            trace.status, trace.message = "Diverged", "iterate left the domain of the data"
            return trace
        trace.records.append(rec)
        if rec.rho <= opts.tol:
            trace.status = "Solved"
            return trace
        if not math.isfinite(rec.rho) or rec.rho > DIVERGE_AT:
            trace.status, trace.message = "Diverged", f"residual {rec.rho:.3g}"
            return trace
        if k == opts.max_iter:
            break
        ap = approx_step(p, x, y)
        rec.shift = ap.shift
        A, rhs = assemble_newton_system(p, ap)
        sol = _solve(A, rhs)
        if sol is None:
            for pieces in _branch_retries(ap, opts.retry_limit):
                ap = _with_branch(p, ap, pieces)
                A, rhs = assemble_newton_system(p, ap)
                sol = _solve(A, rhs)
                if sol is not None:
                    break
        if sol is None:
            trace.status, trace.message = "SingularSystem", f"singular Newton system at iteration {k}"
            return trace
        rec.branch = ap.branch.label()
        rec.step_norm = float(np.linalg.norm(sol))
        try:
            rec.diag_value, _ = regularity_diagnostic(A, _diag_B(ap, p.n), opts.kappa)
        except SingularA:
            rec.diag_value = math.inf
        x = ap.x + sol[:p.n]
        y = ap.y + sol[p.n:]
    trace.status = "MaxIter"
    return trace
