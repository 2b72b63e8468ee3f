import numpy as np
import pytest

from critmult.criticality import search_critical_multiplier
from critmult.errors import NotEqualityOnly, SingularJacobian
from critmult.newtonclassic import kkt_jacobian, newton_kkt
from critmult.ssnewton import SolverOptions, solve_ge

from helpers import random_equality_instance


def test_critical_toy_recursion(crit):
    tr = newton_kkt(crit, [1.0], [0.0], SolverOptions(tol=1e-30))
    assert tr.status == "MaxIter"
    x = np.array([r.x[0] for r in tr.records])
    y = np.array([r.y[0] for r in tr.records])
    np.testing.assert_allclose(x[1:21] / x[:20], 0.5, atol=1e-9)
    np.testing.assert_allclose((1 + y[1:21]) / (1 + y[:20]), 0.5, atol=1e-9)
    ycrit = search_critical_multiplier(crit, [0]).witness.y[0]
    k = np.arange(y.size)
    assert np.all(np.abs(y - ycrit) <= 2.0 ** -k * abs(y[0] - ycrit) * (1 + 1e-9))


def test_quadratic_rate(eqn):
    tr = newton_kkt(eqn, [0.3, 0.3], [0.2])
    assert tr.status == "Solved" and tr.iterations <= 8
    rho = tr.rho
    for a, b in zip(rho[:-1], rho[1:]):
        if a <= 0.1:
            assert b <= 5 * a * a


def test_start_at_kkt_point(eqn):
    tr = newton_kkt(eqn, [0.0, 0.0], [0.0])
    assert tr.status == "Solved" and tr.iterations == 0


def test_rejects_inequalities(ineq, ex54):
    with pytest.raises(NotEqualityOnly):
        newton_kkt(ineq, [0.0], [0.0])


def test_singular_jacobian():
    from critmult.stationarity import CompositeProblem
    p = CompositeProblem.from_strings(2, "x1 + x2^2", ["x1^2"], [{"kind": "zero"}])
    tr = newton_kkt(p, [0.0, 1.0], [0.0])
    assert tr.status == "SingularSystem"
    with pytest.raises(SingularJacobian):
        newton_kkt(p, [0.0, 1.0], [0.0], raise_on_singular=True)


def test_jacobian_block_structure(eqn):
    phi, J = kkt_jacobian(eqn, [0.1, 0.2], [0.3])
    assert J.shape == (3, 3) and J[2, 2] == 0
    np.testing.assert_allclose(J[:2, 2], J[2, :2])


def test_one_step_agrees_with_semismooth_newton():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_equality_instance(rng)
        x0, y0 = rng.standard_normal(p.n), rng.standard_normal(p.m)
        a = newton_kkt(p, x0, y0, SolverOptions(max_iter=1))
        b = solve_ge(p, x0, y0, SolverOptions(max_iter=1))
        np.testing.assert_allclose(a.final.x, b.final.x, atol=1e-12, rtol=1e-12)
        np.testing.assert_allclose(a.final.y, b.final.y, atol=1e-12, rtol=1e-12)
