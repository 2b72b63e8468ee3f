import math

import numpy as np
import pytest

from critmult import gcatalog as gc
from critmult.conealg import cone_subset, polar
from critmult.errors import NotOnGraph, ProblemFileError, Unsupported
from critmult.oracle import graph_set, tangent_batch

from helpers import canon, cone

CATALOG = [gc.zero(), gc.nonpos(), gc.free(), gc.box(-1, 2), gc.abs_(2.0), gc.pwa([-1.0, 1.0], [-2.0, 0.0, 1.0]),
           gc.l0(1.0)]


def test_subdiff_intervals():
    iv = gc.subdiff_interval(gc.nonpos(), 0)
    assert (iv.lo, iv.hi) == (0, math.inf)
    iv = gc.subdiff_interval(gc.zero(), 0)
    assert (iv.lo, iv.hi) == (-math.inf, math.inf)
    assert gc.subdiff_interval(gc.zero(), 0.1).empty
    iv = gc.subdiff_interval(gc.abs_(2), 0)
    assert (iv.lo, iv.hi) == (-2, 2)
    iv = gc.subdiff_interval(gc.abs_(2), 1)
    assert (iv.lo, iv.hi) == (2, 2)


@pytest.mark.parametrize("d", [{"kind": "box", "l": 1, "u": 1}, {"kind": "abs", "alpha": -1},
                               {"kind": "pwa", "breakpoints": [0, 0], "slopes": [0, 1, 2]},
                               {"kind": "pwa", "breakpoints": [0], "slopes": [1, 0]}, {"kind": "bogus"}, {}])
def test_invalid_pieces_rejected(d):
    with pytest.raises(ProblemFileError):
        gc.GPiece.from_dict(d)


def test_round_trip_dicts():
    for g in CATALOG:
        assert gc.GPiece.from_dict(g.to_dict()) == g
    assert gc.l0().nonconvex and not gc.nonpos().nonconvex


def _desc(piece):
    return [(tuple(s.base), tuple(s.direction), s.lo, s.hi) for s in gc.graph_pieces(piece)]


def test_graph_pieces():
    nonpos = gc.graph_pieces(gc.nonpos())
    assert len(nonpos) == 2
    assert nonpos[0].contains((-3, 0)) and not nonpos[0].contains((1, 0))
    assert nonpos[1].contains((0, 3)) and not nonpos[1].contains((0, -1))
    (zero,) = gc.graph_pieces(gc.zero())
    assert zero.contains((0, 7)) and zero.contains((0, -7)) and not zero.contains((1, 0))
    l0 = gc.graph_pieces(gc.l0(1.0))
    assert len(l0) == 2
    assert l0[0].contains((5, 0)) and l0[1].contains((0, -5))


def test_pwa_graph_alternates():
    segs = gc.graph_pieces(gc.pwa([-1.0, 1.0], [-2.0, 0.0, 1.0]))
    horiz = [s.degenerate or s.direction[1] == 0 for s in segs]
    assert horiz == [True, False, True, False, True]


def test_tangent_cones_of_nonpos_graph():
    g = gc.nonpos()
    T = gc.tangent_cone_graph(g, gc.graph_point(g, 0, 0), "T")
    assert canon(T) == canon(type(T)(2, (cone(E=[[0, 1]], A=[[1, 0]]), cone(E=[[1, 0]], A=[[0, -1]]))))
    S = gc.tangent_cone_graph(g, gc.graph_point(g, 0, 0), "Tsharp")
    assert canon(S) == canon(type(S)(2, (cone(E=[[0, 1]]), cone(E=[[1, 0]]))))
    for kind in ("T", "Tsharp"):
        assert canon(gc.tangent_cone_graph(g, gc.graph_point(g, -1, 0), kind)) == canon(
            type(T)(2, (cone(E=[[0, 1]]),)))
        assert canon(gc.tangent_cone_graph(g, gc.graph_point(g, 0, 2), kind)) == canon(
            type(T)(2, (cone(E=[[1, 0]]),)))


def test_limiting_normals_of_nonpos_graph():
    g = gc.nonpos()
    N = gc.limiting_normal_graph(g, gc.graph_point(g, -1, 0))
    assert canon(N) == canon(type(N)(2, (cone(E=[[1, 0]]),)))
    N = gc.limiting_normal_graph(g, gc.graph_point(g, 0, 0))
    expected = type(N)(2, (cone(E=[[0, 1]]), cone(E=[[1, 0]]), cone(A=[[-1, 0], [0, 1]])))
    assert canon(N) == canon(expected)
    N = gc.limiting_normal_graph(gc.zero(), gc.graph_point(gc.zero(), 0, 3))
    assert canon(N) == canon(type(N)(2, (cone(E=[[0, 1]]),)))


def test_projection_examples():
    gp, d = gc.project_graph(gc.nonpos(), -1, 0.2)
    assert (gp.w, gp.y) == (-1, 0) and math.isclose(d, 0.2)
    gp, d = gc.project_graph(gc.nonpos(), 0.5, -0.3)
    assert (gp.w, gp.y, gp.piece_index) == (0, 0, 0) and math.isclose(d, math.sqrt(0.34))
    gp, d = gc.project_graph(gc.zero(), 0.3, 5)
    assert (gp.w, gp.y) == (0, 5) and math.isclose(d, 0.3)


def test_paratingent_cones():
    S = gc.paratingent_cone_graph(gc.zero(), gc.graph_point(gc.zero(), 0, 1))
    assert canon(S) == canon(type(S)(2, (cone(E=[[1, 0]]),)))
    S = gc.paratingent_cone_graph(gc.free(), gc.graph_point(gc.free(), 2, 0))
    assert canon(S) == canon(type(S)(2, (cone(E=[[0, 1]]),)))
    with pytest.raises(Unsupported):
        gc.paratingent_cone_graph(gc.nonpos(), gc.graph_point(gc.nonpos(), 0, 0))


def test_graph_point_rejects_off_graph():
    with pytest.raises(NotOnGraph):
        gc.graph_point(gc.nonpos(), 1, 0)


def _graph_samples(piece, rng, count):
    """Random on-graph points with the kinks always included."""
    segs = gc.graph_pieces(piece)
    pts = [s.point(s.lo) for s in segs if math.isfinite(s.lo)]
    while len(pts) < count:
        s = segs[rng.integers(len(segs))]
        lo = s.lo if math.isfinite(s.lo) else -3.0
        hi = s.hi if math.isfinite(s.hi) else 3.0
        pts.append(s.point(rng.uniform(lo, hi) if hi > lo else lo))
    return pts[:count]


@pytest.mark.parametrize("piece", CATALOG, ids=lambda g: g.kind)
def test_tangent_cone_against_sampling(piece):
    rng = np.random.default_rng(0)
    S = graph_set(piece)
    for pt in _graph_samples(piece, rng, 50):
        T = gc.tangent_cone_graph(piece, gc.graph_point(piece, *pt), "T")
        th = rng.uniform(0, 2 * np.pi, 400)
        D = np.column_stack([np.cos(th), np.sin(th)])
        inside = np.array([T.contains(d) for d in D])
        got = tangent_batch(S, pt, D, "T")
        assert got[inside].all()
        off = D[~inside][:200]
        assert not tangent_batch(S, pt, off, "T").any()


@pytest.mark.parametrize("piece", CATALOG, ids=lambda g: g.kind)
def test_tangent_inside_limiting_tangent(piece):
    rng = np.random.default_rng(1)
    for pt in _graph_samples(piece, rng, 20):
        gp = gc.graph_point(piece, *pt)
        T = gc.tangent_cone_graph(piece, gp, "T")
        S = gc.tangent_cone_graph(piece, gp, "Tsharp")
        for c in T.members:
            assert cone_subset(c, S)


@pytest.mark.parametrize("piece", [g for g in CATALOG if not g.nonconvex], ids=lambda g: g.kind)
def test_polar_of_convex_tangent_is_regular_normal(piece):
    rng = np.random.default_rng(2)
    for pt in _graph_samples(piece, rng, 20):
        gp = gc.graph_point(piece, *pt)
        T = gc.tangent_cone_graph(piece, gp, "T")
        if len(T) != 1:
            continue
        P, N = polar(T.members[0]), gc.regular_normal_graph(piece, gp)
        assert cone_subset(P, N) and cone_subset(N, P)


@pytest.mark.parametrize("piece", CATALOG, ids=lambda g: g.kind)
def test_projection_is_nearest(piece):
    rng = np.random.default_rng(3)
    samples = np.array(_graph_samples(piece, rng, 1000))
    for q in rng.uniform(-3, 3, (20, 2)):
        gp, d = gc.project_graph(piece, *q)
        assert gp.validate(piece)
        assert math.isclose(d, math.hypot(q[0] - gp.w, q[1] - gp.y), abs_tol=1e-12)
        assert d <= np.linalg.norm(samples - q, axis=1).min() + 1e-12
