import numpy as np
import pytest
from scipy.optimize import linprog as ref_linprog

from critmult.simplex import linprog


@pytest.mark.parametrize("exact", [False, True])
def test_small_lp(exact):
    # max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
    res = linprog([1, 1], [[1, 2], [3, 1]], [4, 6], exact=exact)
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [1.6, 1.2])
    assert abs(res.fun - 2.8) < 1e-12


def test_infeasible_and_unbounded():
    assert linprog([1], [[1]], [-1]).status == "infeasible"
    assert linprog([1], [[-1]], [0]).status == "unbounded"


def test_free_variables_and_equalities():
    res = linprog([1, 0], A_eq=[[1, 1]], b_eq=[0], bounds=[(None, 2), (None, None)], exact=True)
    assert res.status == "optimal" and res.fun == 2.0


def test_degenerate_cycling_example():
    # Beale's example cycles without an anti-cycling rule
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    res = linprog(c, A, b, exact=True)
    assert res.status == "optimal" and abs(res.fun - 0.05) < 1e-12


def test_matches_reference_solver():
    rng = np.random.default_rng(0)
    for _ in range(40):
        m, n = rng.integers(2, 6), rng.integers(2, 6)
        A = rng.integers(-3, 4, (m, n)).astype(float)
        b = rng.integers(0, 5, m).astype(float)
        c = rng.integers(-3, 4, n).astype(float)
        bounds = [(-2, 2)] * n
        ours = linprog(c, A, b, bounds=bounds, exact=True)
        ref = ref_linprog(-c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        assert (ours.status == "optimal") == (ref.status == 0)
        if ref.status == 0:
            assert abs(ours.fun + ref.fun) < 1e-8
            assert np.all(A @ ours.x <= b + 1e-9)
