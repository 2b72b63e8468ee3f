import json

import numpy as np
import pytest

from critmult import gcatalog as gc
from critmult.criticality import (ICVerdict, check_aubin_M1, check_noncritical, check_uniqueness_cond,
                                  search_critical_multiplier, verdict_ic_M, verdict_ic_M1, witness_residual)
from critmult.errors import NotAMultiplier
from critmult.stationarity import CompositeProblem, DirectionPD, PointPD, check_cq, tangent_gph_M1

from helpers import random_instance, reference_noncritical, reference_uniqueness

X0 = np.zeros(2)


def test_critical_multiplier_of_degenerate_equality(crit):
    v = check_noncritical(crit, [0], [-1])
    assert v.status == "Critical"
    assert abs(v.witness.dx[0]) == 1 and v.witness.dy[0] == 0
    assert check_noncritical(crit, [0], [0]).status == "Noncritical"


@pytest.mark.parametrize("y", [[1, 0], [0, 1]])
@pytest.mark.parametrize("kind", ["graphical", "limiting"])
def test_vertices_of_two_variable_example_noncritical(ex54, y, kind):
    assert check_noncritical(ex54, X0, y, kind).noncritical


def test_not_a_multiplier(ex54):
    with pytest.raises(NotAMultiplier):
        check_noncritical(ex54, X0, [1, 1])


def test_uniqueness_condition(ex54, ineq):
    holds, dy = check_uniqueness_cond(ex54, X0, [1, 0])
    assert not holds
    assert dy[0] == -dy[1] != 0
    holds, dy = check_uniqueness_cond(ex54, X0, [0, 1])
    assert not holds and dy[0] == -dy[1] != 0
    for kind in ("graphical", "limiting"):
        assert check_uniqueness_cond(ineq, [0], [1], kind) == (True, None)


def test_uniqueness_from_full_rank_equalities(eqn):
    for kind in ("graphical", "limiting"):
        assert check_uniqueness_cond(eqn, X0, [0], kind)[0]


def test_verdict_M1(ex54, ineq, crit):
    v = verdict_ic_M1(ex54, X0, [1, 0], "at")
    assert v.answer == "No"
    dy = np.array(v.witness["dy"])
    assert dy[0] == -dy[1] != 0
    for mode in ("at", "around"):
        assert verdict_ic_M1(ineq, [0], [1], mode).answer == "Yes"
    v = verdict_ic_M1(crit, [0], [-1], "at")
    assert v.answer == "No" and abs(v.witness["dx"][0]) == 1


def test_verdict_M(ex54, crit):
    v = verdict_ic_M(ex54, X0, "at")
    assert (v.answer, v.proof_path) == ("Yes", "exact-constant-H")
    v = verdict_ic_M(crit, [0], "at")
    assert v.answer == "No"
    assert v.witness["y"] == [-1.0] and abs(v.witness["dx"][0]) == 1


def test_verdict_M_unconstrained():
    p = CompositeProblem.from_strings(2, "x1^2 + x1*x2 + x2^2", ["x1", "x2"], [gc.free(), gc.free()])
    for mode in ("at", "around"):
        assert verdict_ic_M(p, X0, mode).answer == "Yes"


def test_verdict_M_refuses_l0():
    p = CompositeProblem.from_strings(1, "0.5*x1^2", ["x1"], [gc.l0(1.0)])
    v = verdict_ic_M(p, [0], "at")
    assert v.answer == "Inconclusive" and "l0" in v.reason
    # the criticality check itself still runs for l0
    assert check_noncritical(p, [0], [0]).noncritical


def test_verdict_M_inconclusive_without_cq():
    # x^2 + x^4 with the degenerate constraint x^2 = 0: multipliers noncritical, CQ fails
    p = CompositeProblem.from_strings(1, "x1^2", ["x1^3"], [gc.zero()])
    v = verdict_ic_M(p, [0], "at")
    assert v.answer == "Inconclusive" and not v.assumptions["cq"]


def test_search_critical_multiplier(crit, ex54):
    res = search_critical_multiplier(crit, [0])
    assert res.witness.y.tolist() == [-1.0] and res.proof_path == "exact-branch-LP"
    assert abs(res.witness.dx[0]) == 1 and res.witness.dy[0] == 0
    res = search_critical_multiplier(ex54, X0)
    assert res.witness is None and res.proof_path == "exact-constant-H"


def test_strictly_convex_qps_have_no_critical_multiplier():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p, x, _ = random_instance(rng, 3, 3, kinds=("nonpos", "free"), indefinite=0.0, quadratic_F=False)
        if not check_cq(p, x)[0]:
            continue
        res = search_critical_multiplier(p, x)
        assert res.witness is None and res.proof_path == "exact-constant-H"


def test_aubin_criterion(ineq, crit):
    assert check_aubin_M1(ineq, [0], [1])
    assert not check_aubin_M1(crit, [0], [-1])
    p = CompositeProblem.from_strings(2, "x1^2 + x2^2", [], [])
    assert check_aubin_M1(p, X0, np.zeros(0))


def test_decomposition_against_independent_reference():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p, x, y = random_instance(rng)
        v = verdict_ic_M1(p, x, y, "at")
        assert (v.answer == "Yes") == (reference_noncritical(p, x, y) and reference_uniqueness(p, x, y))


def test_limiting_noncritical_implies_graphical():
    rng = np.random.default_rng(9)
    for _ in range(40):
        p, x, y = random_instance(rng)
        if check_noncritical(p, x, y, "limiting").noncritical:
            assert check_noncritical(p, x, y, "graphical").noncritical
        assert check_noncritical(p, x, y, "limiting").noncritical == reference_noncritical(p, x, y, "Tsharp")


def test_witnesses_replay():
    rng = np.random.default_rng(10)
    seen = 0
    for _ in range(60):
        p, x, y = random_instance(rng)
        v = check_noncritical(p, x, y)
        if v.noncritical:
            continue
        seen += 1
        w = v.witness
        assert witness_residual(p, x, y, w.dx, w.dy) <= 1e-8
        assert tangent_gph_M1(p, PointPD(x, y), None, DirectionPD.primal_dual(w.dx, w.dy), "T", 1e-8)
    assert seen > 0


def test_verdict_json_round_trip(ex54):
    for v in (verdict_ic_M1(ex54, X0, [1, 0]), verdict_ic_M(ex54, X0)):
        d = json.loads(json.dumps(v.to_dict()))
        assert ICVerdict.from_dict(d).to_dict() == v.to_dict()
