"""Classic Newton method on the KKT map of equality-constrained instances.

For ``g = 0`` indicator in every coordinate the stationarity system is the
smooth equation ``Phi(x, y) = (grad_x L(x, y), F(x)) = 0`` and Newton's method
applies directly. Near a critical multiplier its iterates are attracted to
that multiplier and converge only linearly.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NotEqualityOnly, SingularA, SingularJacobian
from .smoothfn import jacobian_data, lagrangian_xderivs
from .ssnewton import SolverOptions, SolveTrace, _record, regularity_diagnostic, DIVERGE_AT
from .stationarity import CompositeProblem


def kkt_jacobian(p: CompositeProblem, x, y) -> tuple[np.ndarray, np.ndarray]:
    """``Phi(x, y)`` and its Jacobian ``[[H, B^T], [B, 0]]``."""
    grad, H = lagrangian_xderivs(p, x, y)
    vals, B, _ = jacobian_data(list(p.F), x)
    J = np.block([[H, B.T], [B, np.zeros((p.m, p.m))]])
    return np.concatenate([grad, vals]), J


def newton_kkt(p: CompositeProblem, x0, y0, opts: SolverOptions | None = None,
               raise_on_singular: bool = False) -> SolveTrace:
    if not p.equality_only:
        raise NotEqualityOnly("the classic Newton baseline needs every g piece to be of kind zero")
    opts = opts or SolverOptions()
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    y = np.asarray(y0, dtype=float).reshape(-1).copy()
    trace = SolveTrace("newton")
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
        phi, J = kkt_jacobian(p, x, y)
        try:
            step = np.linalg.solve(J, -phi)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)):
            if raise_on_singular:
                raise SingularJacobian(f"singular KKT Jacobian at iteration {k}")
            trace.status, trace.message = "SingularSystem", f"singular KKT Jacobian at iteration {k}"
            return trace
        rec.shift = 0.0
        rec.branch = "0" * p.m
        rec.step_norm = float(np.linalg.norm(step))
        Bmat = np.eye(p.n + p.m)
        Bmat[p.n:, p.n:] *= -1.0
        try:
            rec.diag_value, _ = regularity_diagnostic(J, Bmat, opts.kappa)
        except SingularA:
            rec.diag_value = math.inf
        x = x + step[:p.n]
        y = y + step[p.n:]
    trace.status = "MaxIter"
    return trace
