import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critmult.errors import DimensionMismatch, DomainError, ExprSyntaxError, NonIntegerExponent, UnknownVariable
from critmult.oracle import fd_check
from critmult.smoothfn import (constant, eval012, jacobian_data, lagrangian_xderivs, make_callable, parse_expr,
                               to_text)

from helpers import random_expr


def test_f0_of_two_variable_example():
    e = parse_expr("0.5*x1^2 + 0.5*(x2+1)^2", 2)
    v, g, H = eval012(e, [0, 0])
    assert v == 0.5
    np.testing.assert_array_equal(g, [0, 1])
    np.testing.assert_array_equal(H, np.eye(2))


def test_identity_expression():
    e = parse_expr("x1", 1)
    v, g, H = eval012(e, [3.5])
    assert (v, g.tolist(), H.tolist()) == (3.5, [1.0], [[0.0]])


def test_cubic_component_at_origin():
    v, g, H = eval012(parse_expr("x1^3 - x2", 2), [0, 0])
    assert v == 0
    np.testing.assert_array_equal(g, [0, -1])
    np.testing.assert_array_equal(H, np.zeros((2, 2)))


def test_constant():
    v, g, H = eval012(parse_expr("2.0", 3), [1, 2, 3])
    assert v == 2.0 and not g.any() and not H.any()
    assert constant(4, 2)([0, 0]) == 4.0


@pytest.mark.parametrize("text, err", [
    ("x3 - 1", UnknownVariable),
    ("x1 +", ExprSyntaxError),
    ("x1^0.5", NonIntegerExponent),
    ("foo(x1)", ExprSyntaxError),
    ("", ExprSyntaxError),
    ("(x1", ExprSyntaxError),
    ("x1 $ 2", ExprSyntaxError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse_expr(text, 2)


def test_syntax_error_is_a_syntax_error():
    with pytest.raises(SyntaxError):
        parse_expr("x1 )", 1)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval012(parse_expr("log(x1)", 1), [-1.0])
    with pytest.raises(DomainError):
        eval012(parse_expr("1/x1", 1), [0.0])


def test_point_dimension_checked():
    with pytest.raises(DimensionMismatch):
        eval012(parse_expr("x1", 2), [1.0])


def test_lagrangian_at_first_vertex(ex54):
    g, H = lagrangian_xderivs(ex54, [0, 0], [1, 0])
    np.testing.assert_array_equal(g, [0, 0])
    np.testing.assert_array_equal(H, np.eye(2))


def test_lagrangian_with_zero_multiplier(ex54):
    x = np.array([0.3, -0.2])
    g, H = lagrangian_xderivs(ex54, x, [0, 0])
    _, g0, H0 = eval012(ex54.f0, x)
    np.testing.assert_array_equal(g, g0)
    np.testing.assert_array_equal(H, H0)


def test_lagrangian_of_degenerate_equality(crit):
    g, H = lagrangian_xderivs(crit, [0], [-1])
    assert g.tolist() == [0.0] and H.tolist() == [[0.0]]


def test_jacobian_data(ex54):
    vals, B, Hs = jacobian_data(list(ex54.F), [0, 0])
    np.testing.assert_array_equal(vals, [0, 0])
    np.testing.assert_array_equal(B, [[0, -1], [0, -1]])
    assert Hs.shape == (2, 2, 2) and not Hs.any()


def test_fd_check_on_catalog_examples(ex54):
    assert fd_check(parse_expr("x1^2", 1), [3]) <= 1e-8
    assert fd_check(ex54.f0, [0.2, -0.1]) <= 1e-6
    assert fd_check(parse_expr("exp(x1)", 1), [0]) <= 1e-6


def test_hessian_exactly_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(100):
        e = parse_expr(random_expr(rng, 3, 4), 3)
        try:
            _, _, H = eval012(e, rng.uniform(-1, 1, 3))
        except DomainError:
            continue
        assert np.array_equal(H, H.T)


def test_print_parse_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(40):
        e = parse_expr(random_expr(rng, 2, 4), 2)
        e2 = parse_expr(to_text(e), 2)
        for x in rng.uniform(-1, 1, (100 // 40 + 1, 2)):
            try:
                a = eval012(e, x)
            except DomainError:
                continue
            b = eval012(e2, x)
            assert a[0] == b[0]
            np.testing.assert_array_equal(a[1], b[1])
            np.testing.assert_array_equal(a[2], b[2])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_derivatives_match_differences(seed, x):
    e = parse_expr(random_expr(np.random.default_rng(seed), 2, 3), 2)
    try:
        err = fd_check(e, x)
    except DomainError:
        return
    assert err <= 1e-6


def test_callable():
    f = make_callable(parse_expr("sin(x1) * cos(x2)", 2))
    assert math.isclose(f(np.array([0.3, 0.4])), math.sin(0.3) * math.cos(0.4))
