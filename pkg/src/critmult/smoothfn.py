"""Smooth data as expression trees with exact second-order forward-mode AD.

Grammar (highest binding first)::

    atom    ::= number | "x" digits | func "(" expr ")" | "(" expr ")"
    power   ::= atom [ "^" unary ]          # right associative, integer exponent
    unary   ::= ("-" | "+") unary | power
    term    ::= unary { ("*" | "/") unary }
    expr    ::= term { ("+" | "-") term }

with ``func`` one of ``sin cos exp log``. So ``-x1^2`` is ``-(x1^2)`` and
``x1^2^2`` is ``x1^4``. Exponents must reduce to a constant integer.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainError, ExprSyntaxError, NonIntegerExponent, UnknownVariable

FUNCTIONS = ("sin", "cos", "exp", "log")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<var>x\d+)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


# -- AST --------------------------------------------------------------------

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    k: int


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node


@dataclass(frozen=True)
class Expr:
    """Parsed expression in ``n`` variables. Immutable; safe to share between threads."""

    root: Node
    n: int

    def __call__(self, x) -> float:
        return value(self, x)

    def __str__(self) -> str:
        return to_text(self)


# -- parsing ----------------------------------------------------------------

def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r} at position {pos}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens, n):
        self.tokens = tokens
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ExprSyntaxError("unexpected end of expression")
        if value is not None and tok[1] != value:
            raise ExprSyntaxError(f"expected {value!r}, found {tok[1]!r}")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            exponent = self.unary()
            k = _constant_value(exponent)
            if k is None or not float(k).is_integer():
                raise NonIntegerExponent("exponent must be a constant integer")
            return Pow(base, int(k))
        return base

    def atom(self):
        kind, tok = self.take()
        if kind == "num":
            return Num(float(tok))
        if kind == "var":
            idx = int(tok[1:])
            if idx < 1 or idx > self.n:
                raise UnknownVariable(f"{tok} is out of range for n={self.n}")
            return Var(idx)
        if kind == "name":
            if tok not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function or identifier {tok!r}")
            self.take("(")
            arg = self.expr()
            self.take(")")
            return Call(tok, arg)
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExprSyntaxError(f"unexpected token {tok!r}")


def _constant_value(node: Node):
    """Value of a variable-free subtree, or None."""
    try:
        jet = _eval(node, np.zeros(0), 0)
    except _HasVariable:
        return None
    except DomainError:
        return None
    return jet[0]


class _HasVariable(Exception):
    pass


def parse_expr(text: str, n: int) -> Expr:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression")
    parser = _Parser(_tokenize(text), n)
    root = parser.expr()
    if parser.i != len(parser.tokens):
        raise ExprSyntaxError(f"trailing input at token {parser.tokens[parser.i][1]!r}")
    return Expr(root, n)


def to_text(e: Expr | Node) -> str:
    node = e.root if isinstance(e, Expr) else e
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)}^({node.k}))"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(node)


# -- forward-mode second order AD ------------------------------------------
# A jet is (value, gradient, hessian). Every Hessian update is written so that
# entry (i, j) and (j, i) see the same floating point operations, which keeps
# the result exactly symmetric.

def _chain(jet, f0, f1, f2):
    v, g, h = jet
    return f0, f1 * g, f1 * h + f2 * np.outer(g, g)


def _unary(name: str, v: float):
    if name == "sin":
        return math.sin(v), math.cos(v), -math.sin(v)
    if name == "cos":
        return math.cos(v), -math.sin(v), -math.cos(v)
    if name == "exp":
        ev = math.exp(v)
        return ev, ev, ev
    if name == "log":
        if v <= 0.0:
            raise DomainError(f"log of nonpositive value {v}")
        return math.log(v), 1.0 / v, -1.0 / (v * v)
    raise ValueError(name)


def _power(v: float, k: int):
    if k == 0:
        return 1.0, 0.0, 0.0
    if v == 0.0 and k < 0:
        raise DomainError("division by zero in negative power")
    f0 = v ** k
    f1 = k * v ** (k - 1) if k != 1 else 1.0
    f2 = k * (k - 1) * v ** (k - 2) if k not in (0, 1) else 0.0
    return f0, f1, f2


def _eval(node: Node, x: np.ndarray, n: int):
    if isinstance(node, Num):
        return node.value, np.zeros(n), np.zeros((n, n))
    if isinstance(node, Var):
        if n == 0:
            raise _HasVariable
        g = np.zeros(n)
        g[node.index - 1] = 1.0
        return float(x[node.index - 1]), g, np.zeros((n, n))
    if isinstance(node, Neg):
        v, g, h = _eval(node.arg, x, n)
        return -v, -g, -h
    if isinstance(node, BinOp):
        a = _eval(node.left, x, n)
        b = _eval(node.right, x, n)
        if node.op == "+":
            return a[0] + b[0], a[1] + b[1], a[2] + b[2]
        if node.op == "-":
            return a[0] - b[0], a[1] - b[1], a[2] - b[2]
        if node.op == "*":
            return _mul(a, b)
        if b[0] == 0.0:
            raise DomainError("division by zero")
        inv = _chain(b, *_power(b[0], -1))
        return _mul(a, inv)
    if isinstance(node, Pow):
        base = _eval(node.base, x, n)
        return _chain(base, *_power(base[0], node.k))
    if isinstance(node, Call):
        arg = _eval(node.arg, x, n)
        return _chain(arg, *_unary(node.func, arg[0]))
    raise TypeError(node)


def _mul(a, b):
    av, ag, ah = a
    bv, bg, bh = b
    cross = np.outer(ag, bg)
    return av * bv, av * bg + bv * ag, av * bh + bv * ah + (cross + cross.T)


def _as_point(x, n: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise DimensionMismatch(f"expected point of length {n}, got shape {x.shape}")
    return x


def eval012(f: Expr, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of ``f`` at ``x``."""
    x = _as_point(x, f.n)
    v, g, h = _eval(f.root, x, f.n)
    if not math.isfinite(v):
        raise DomainError(f"non-finite value {v}")
    return float(v), np.array(g, dtype=float), np.array(h, dtype=float)


def value(f: Expr, x) -> float:
    return eval012(f, x)[0]


def make_callable(f: Expr) -> Callable[[np.ndarray], float]:
    return lambda x: value(f, x)


def constant(c: float, n: int) -> Expr:
    return Expr(Num(float(c)), n)


def jacobian_data(F: list[Expr], x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values (m,), Jacobian (m, n) and stacked Hessians (m, n, n) of the components of F."""
    m = len(F)
    n = F[0].n if m else np.asarray(x).size
    vals = np.zeros(m)
    jac = np.zeros((m, n))
    hess = np.zeros((m, n, n))
    for i, Fi in enumerate(F):
        vals[i], jac[i], hess[i] = eval012(Fi, x)
    return vals, jac, hess


def lagrangian_xderivs(p, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian in x of L(x, y) = f0(x) + y^T F(x).

    ``p`` is anything exposing ``n``, ``m``, ``f0`` and ``F`` (a CompositeProblem).
    """
    x = _as_point(x, p.n)
    y = np.atleast_1d(np.asarray(y, dtype=float)) if p.m else np.zeros(0)
    if y.shape != (p.m,):
        raise DimensionMismatch(f"multiplier must have length {p.m}, got shape {y.shape}")
    _, grad, hess = eval012(p.f0, x)
    for yi, Fi in zip(y, p.F):
        _, gi, hi = eval012(Fi, x)
        grad = grad + yi * gi
        hess = hess + yi * hi
    return grad, hess
