import io
import math

import numpy as np
import pytest

from critmult import gcatalog as gc
from critmult.criticality import verdict_ic_M1
from critmult.errors import DegenerateBranch, SingularA
from critmult.ssnewton import (BranchSelection, SolverOptions, approx_step, assemble_newton_system,
                               regularity_diagnostic, solve_ge)
from critmult.stationarity import CompositeProblem, Params, PointPD, residual
from critmult.smoothfn import lagrangian_xderivs

from helpers import random_instance


def test_approx_step_equality_piece(eqn):
    x, y = np.array([0.3, -0.2]), np.array([0.7])
    ap = approx_step(eqn, x, y)
    np.testing.assert_array_equal(ap.y, y)
    F = 0.3 + 0.09 + 0.04
    np.testing.assert_allclose(ap.u, [-F])
    np.testing.assert_array_equal(ap.v, lagrangian_xderivs(eqn, x, y)[0])


def test_approx_step_nonpos_piece():
    p = CompositeProblem.from_strings(1, "0.5*x1^2", ["x1 - 1"], [gc.nonpos()])
    ap = approx_step(p, [0.0], [0.2])
    assert ap.y.tolist() == [0.0] and ap.u.tolist() == [0.0]
    assert ap.branch.pieces == (0,) and ap.branch.directions[0][1] == 0.0


def test_approx_step_fixed_point(ineq):
    ap = approx_step(ineq, [0.0], [1.0])
    assert ap.shift == 0 and not ap.v.any() and not ap.u.any()


def test_approx_point_is_on_graph():
    rng = np.random.default_rng(0)
    for _ in range(40):
        p, x, y = random_instance(rng)
        xs, ys = x + 0.3 * rng.standard_normal(p.n), y + 0.3 * rng.standard_normal(p.m)
        ap = approx_step(p, xs, ys)
        assert max(residual(p, PointPD(ap.x, ap.y), Params(ap.v, ap.u))) <= 1e-12


def test_newton_system_for_equalities(eqn):
    x, y = np.array([0.1, 0.2]), np.array([0.3])
    ap = approx_step(eqn, x, y)
    A, rhs = assemble_newton_system(eqn, ap)
    _, H = lagrangian_xderivs(eqn, x, y)
    B = np.array([[1.2, 0.4]])
    np.testing.assert_allclose(A, np.block([[H, B.T], [B, np.zeros((1, 1))]]))
    np.testing.assert_allclose(rhs, np.concatenate([-ap.v, ap.u]))


def test_newton_system_rows_for_active_and_free_coordinates():
    p = CompositeProblem.from_strings(2, "x1^2 + x2^2", ["x1", "x2"], [gc.nonpos(), gc.free()])
    ap = approx_step(p, [0.0, 0.5], [2.0, 0.0])
    A, rhs = assemble_newton_system(p, ap)
    np.testing.assert_array_equal(A[2], [1, 0, 0, 0])  # B_1 dx = u_1
    np.testing.assert_array_equal(A[3], [0, 0, 0, -1])  # dy_2 = 0


def test_degenerate_branch():
    with pytest.raises(DegenerateBranch):
        BranchSelection((0,), ((0.0, 0.0),))


def test_solves_inequality_toy(ineq):
    tr = solve_ge(ineq, [0.5], [0.5])
    assert tr.status == "Solved" and tr.iterations <= 3
    assert tr.final.x.tolist() == [0.0] and tr.final.y.tolist() == [1.0]


def test_critical_toy_rates(crit):
    tr = solve_ge(crit, [1.0], [0.0], SolverOptions(tol=1e-30))
    assert tr.status == "MaxIter" and tr.iterations == 50
    xs = np.array([r.x[0] for r in tr.records])
    ys = np.array([r.y[0] for r in tr.records])
    np.testing.assert_allclose(xs[1:21] / xs[:20], 0.5, atol=1e-9)
    np.testing.assert_allclose(ys[1:21], (ys[:20] - 1) / 2, atol=1e-12)
    np.testing.assert_allclose(tr.step_ratios[:20], 0.5, atol=1e-9)
    np.testing.assert_allclose(tr.ratios[:20], 0.25, atol=1e-9)


def test_critical_toy_at_default_tolerance(crit):
    # residuals shrink by 1/4 per step, so tol 1e-12 is reached after 21 steps
    tr = solve_ge(crit, [1.0], [0.0])
    assert tr.status == "Solved" and tr.iterations == 21
    assert abs(tr.final.y[0] + 1) < 1e-6


def test_start_at_solution(ineq):
    tr = solve_ge(ineq, [0.0], [1.0])
    assert tr.status == "Solved" and tr.iterations == 0


def test_superlinear_signature(eqn):
    assert verdict_ic_M1(eqn, [0, 0], [0], "around").answer == "Yes"
    rng = np.random.default_rng(1)
    for _ in range(10):
        z = rng.standard_normal(3)
        z *= 0.1 * rng.uniform() ** (1 / 3) / np.linalg.norm(z)
        tr = solve_ge(eqn, z[:2], z[2:])
        assert tr.status == "Solved"
        rho = tr.rho
        assert np.all(rho[2:] <= 0.5 * rho[1:-1] + 1e-300)
        r = tr.ratios
        if r.size >= 3:
            assert r[-3] > r[-2] > r[-1]


def test_diagnostic_identity():
    for n in (1, 3):
        val, ok = regularity_diagnostic(np.eye(n), np.zeros((n, n)), 1.0)
        assert math.isclose(val, math.sqrt(n)) and ok


def test_diagnostic_singular():
    with pytest.raises(SingularA):
        regularity_diagnostic(np.zeros((2, 2)), np.eye(2), 1.0)


def test_diagnostic_recorded_for_inequality_toy(ineq):
    tr = solve_ge(ineq, [0.5], [0.5])
    d = tr.records[0].diag_value
    assert math.isfinite(d)
    A, rhs = assemble_newton_system(ineq, approx_step(ineq, [0.5], [0.5]))
    assert regularity_diagnostic(A, np.diag([1.0, -1.0]), d)[1]


def test_traces_deterministic_and_csv(eqn):
    a = solve_ge(eqn, [0.3, 0.3], [0.2])
    b = solve_ge(eqn, [0.3, 0.3], [0.2])
    fa, fb = io.StringIO(), io.StringIO()
    a.to_csv(fa)
    b.to_csv(fb)
    assert fa.getvalue() == fb.getvalue()
    header = fa.getvalue().splitlines()[0]
    assert header == "iter,x1,x2,y1,r_grad,r_graph,shift,branch,step_norm,diag_value"


def test_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(tol=0)
    with pytest.raises(ValueError):
        SolverOptions(beta=0.5)


def test_diverged_status():
    # the first Newton step leaves the domain of log
    p = CompositeProblem.from_strings(1, "x1 - 2*log(x1)", ["x1"], [gc.free()])
    tr = solve_ge(p, [5.0], [0.0])
    assert tr.status == "Diverged" and "domain" in tr.message
