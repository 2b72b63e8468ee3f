"""Random instances and independent reference computations shared by the tests."""

import itertools

import numpy as np
from scipy.optimize import linprog

from critmult import gcatalog as gc
from critmult.stationarity import CompositeProblem, graph_points, local_data


def canon(union):
    """Hashable form of a ConeUnion (rows are already canonical)."""
    return {(tuple(map(tuple, c.E.tolist())), tuple(map(tuple, c.A.tolist()))) for c in union.members}


def cone(E=(), A=()):
    from critmult.conealg import PolyhedralCone
    return PolyhedralCone(2, np.array(E, dtype=float).reshape(-1, 2), np.array(A, dtype=float).reshape(-1, 2))


# -- random expressions -------------------------------------------------------------

def random_expr(rng, n, depth=3):
    """A random expression string over the catalog: + - * / integer powers, sin cos exp log."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return f"x{rng.integers(1, n + 1)}"
        return f"{rng.integers(1, 10) / 4:g}"
    r = rng.random()
    a = random_expr(rng, n, depth - 1)
    if r < 0.2:
        return f"({a} + {random_expr(rng, n, depth - 1)})"
    if r < 0.35:
        return f"({a} - {random_expr(rng, n, depth - 1)})"
    if r < 0.55:
        return f"({a} * {random_expr(rng, n, depth - 1)})"
    if r < 0.62:
        return f"({a} / (2 + {random_expr(rng, n, depth - 1)}^2))"
    if r < 0.72:
        return f"({a})^{rng.integers(2, 4)}"
    if r < 0.8:
        return f"sin({a})"
    if r < 0.88:
        return f"cos({a})"
    if r < 0.94:
        return f"exp(0.5*{a})"
    return f"log(1 + ({a})^2)"


# -- random composite instances with a known stationary pair ----------------------------

_KINDS = ("nonpos", "zero", "free", "box", "abs", "pwa")


def _piece_and_point(rng, kind):
    """A piece with an integer graph point (w, y) on gph dg, corners favoured."""
    if kind == "nonpos":
        c = rng.integers(3)
        return gc.nonpos(), [(0, 0), (0, int(rng.integers(1, 3))), (-1, 0)][c]
    if kind == "zero":
        return gc.zero(), (0, int(rng.integers(-2, 3)))
    if kind == "free":
        return gc.free(), (int(rng.integers(-1, 2)), 0)
    if kind == "box":
        c = rng.integers(4)
        return gc.box(-1, 1), [(1, 0), (1, 2), (-1, 0), (0, 0)][c]
    if kind == "abs":
        c = rng.integers(3)
        return gc.abs_(1.0), [(0, 1), (0, 0), (1, 1)][c]
    c = rng.integers(3)
    return gc.pwa([0.0], [-1.0, 1.0]), [(0, -1), (0, 1), (0, 0)][c]


def random_instance(rng, n_max=3, m_max=3, kinds=_KINDS, indefinite=0.5, quadratic_F=True):
    """Integer data with x_bar = 0 stationary for the constructed multiplier y."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    pieces, w, y = [], [], []
    for _ in range(m):
        g, (wi, yi) = _piece_and_point(rng, kinds[rng.integers(len(kinds))])
        pieces.append(g)
        w.append(wi)
        y.append(yi)
    B = rng.integers(-1, 2, size=(m, n))
    F = []
    for i in range(m):
        terms = [str(w[i])] + [f"{B[i, j]}*x{j + 1}" for j in range(n) if B[i, j]]
        if quadratic_F and rng.random() < 0.5:
            j = rng.integers(1, n + 1)
            terms.append(f"{rng.integers(-1, 2)}*x{j}^2")
        F.append(" + ".join(terms))
    c = -(B.T @ np.array(y))
    Q = rng.integers(-1, 2, size=(n, n))
    Q = Q + Q.T
    if rng.random() >= indefinite:
        Q = Q + 3 * n * np.eye(n, dtype=int)  # diagonally dominant
    terms = ["0"]
    for i in range(n):
        for j in range(i, n):
            coef = Q[i, j] / 2 if i == j else Q[i, j]
            if coef:
                terms.append(f"{coef:g}*x{i + 1}*x{j + 1}")
        if c[i]:
            terms.append(f"{c[i]}*x{i + 1}")
    p = CompositeProblem.from_strings(n, " + ".join(terms), F, pieces)
    return p, np.zeros(n), np.array(y, dtype=float)


def random_equality_instance(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, n + 1))
    F = []
    for i in range(m):
        terms = [f"{rng.normal():.3f}*x{j + 1}" for j in range(n)]
        terms.append(f"{rng.normal():.3f}*x{rng.integers(1, n + 1)}^2")
        F.append(" + ".join(terms))
    f0 = " + ".join(f"0.5*x{j + 1}^2" for j in range(n)) + f" + {rng.normal():.3f}*x1^3"
    p = CompositeProblem.from_strings(n, f0, F, [gc.zero()] * m)
    return p


# -- independent reference: branch LPs through scipy (HiGHS) -----------------------------

def _planar_rows(c):
    """Equality and inequality rows of a planar cone in (a, b)."""
    return c.E, c.A


def reference_noncritical(p, x, y, kind="T"):
    """True iff no dx != 0 solves H dx + B^T dy = 0 with (B_i dx, dy_i) in T_i, via scipy LPs."""
    ld = local_data(p, x)
    H, B = ld.hess_L(y), ld.B
    n, m = p.n, p.m
    members = [gc.tangent_cone_graph(g, gp, kind).members for g, gp in zip(p.g, graph_points(p, ld, y))]
    for combo in itertools.product(*members):
        Aeq = [np.hstack([H, B.T])]
        Aub = []
        for i, c in enumerate(combo):
            for row in c.E:
                Aeq.append(np.concatenate([row[0] * B[i], row[1] * np.eye(m)[i]])[None, :])
            for row in c.A:
                Aub.append(np.concatenate([row[0] * B[i], row[1] * np.eye(m)[i]])[None, :])
        Aeq = np.vstack(Aeq)
        Aub = np.vstack(Aub) if Aub else None
        bub = np.zeros(Aub.shape[0]) if Aub is not None else None
        for j in range(n):
            for s in (1.0, -1.0):
                obj = np.zeros(n + m)
                obj[j] = -s
                res = linprog(obj, A_ub=Aub, b_ub=bub, A_eq=Aeq, b_eq=np.zeros(Aeq.shape[0]),
                              bounds=[(-1, 1)] * (n + m), method="highs")
                if res.status == 0 and -res.fun > 1e-9:
                    return False
    return True


def reference_uniqueness(p, x, y, kind="T"):
    """True iff B^T dy = 0, (0, dy_i) in T_i forces dy = 0, via scipy LPs."""
    ld = local_data(p, x)
    B = ld.B
    m = p.m
    members = [gc.tangent_cone_graph(g, gp, kind).members for g, gp in zip(p.g, graph_points(p, ld, y))]
    for combo in itertools.product(*members):
        Aeq, Aub = [B.T], []
        for i, c in enumerate(combo):
            for row in c.E:
                Aeq.append(row[1] * np.eye(m)[i][None, :])
            for row in c.A:
                Aub.append(row[1] * np.eye(m)[i][None, :])
        Aeq = np.vstack(Aeq)
        Aub = np.vstack(Aub) if Aub else None
        bub = np.zeros(Aub.shape[0]) if Aub is not None else None
        for j in range(m):
            for s in (1.0, -1.0):
                obj = np.zeros(m)
                obj[j] = -s
                res = linprog(obj, A_ub=Aub, b_ub=bub, A_eq=Aeq, b_eq=np.zeros(Aeq.shape[0]),
                              bounds=[(-1, 1)] * m, method="highs")
                if res.status == 0 and -res.fun > 1e-9:
                    return False
    return True
