"""Problem files: the JSON form of a composite program.

A file looks like::

    {"schema": 1, "n": 2, "m": 1,
     "f0": "0.5*x1^2 + 0.5*x2^2",
     "F": ["x1 + x1^2 + x2^2"],
     "g": [{"kind": "zero"}],
     "points": {"stationary": {"x": [0, 0], "y": [0]}}}

``points`` is optional. The names ``stationary`` and ``start`` are read by
the command line tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import gcatalog as gc
from .errors import CritMultError, ProblemFileError
from .smoothfn import parse_expr, to_text
from .stationarity import CompositeProblem

SCHEMA = 1
BUNDLED = ("example54.json", "crit_eq.json", "ineq_toy.json", "eq_noncrit.json")


@dataclass
class ProblemFile:
    problem: CompositeProblem
    points: dict = field(default_factory=dict)  # name -> {"x": array, "y": array | None}
    name: str = ""

    def point(self, name: str):
        pt = self.points.get(name)
        return (None, None) if pt is None else (pt["x"], pt["y"])

    def to_dict(self) -> dict:
        p = self.problem
        out = {"schema": SCHEMA, "n": p.n, "m": p.m, "f0": to_text(p.f0),
               "F": [to_text(e) for e in p.F], "g": [g.to_dict() for g in p.g]}
        if self.points:
            out["points"] = {k: {"x": v["x"].tolist(), **({"y": v["y"].tolist()} if v["y"] is not None else {})}
                             for k, v in self.points.items()}
        return out


def _vector(val, size, what):
    try:
        arr = np.asarray(val, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{what}: not a list of numbers") from exc
    if arr.size != size:
        raise ProblemFileError(f"{what}: expected {size} entries, got {arr.size}")
    return arr


def from_dict(d: dict, name: str = "") -> ProblemFile:
    if not isinstance(d, dict):
        raise ProblemFileError("a problem file must hold a JSON object")
    schema = d.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ProblemFileError(f"unsupported schema {schema!r}, expected {SCHEMA}")
    try:
        n, m = int(d["n"]), int(d["m"])
        f0, F, g = d["f0"], d["F"], d["g"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"missing or malformed field: {exc}") from exc
    if not isinstance(F, list) or not isinstance(g, list) or len(F) != m or len(g) != m:
        raise ProblemFileError(f"F and g must be lists of length m={m}")
    if not all(isinstance(s, str) for s in [f0, *F]):
        raise ProblemFileError("f0 and the entries of F must be strings")
    for piece in g:
        if not isinstance(piece, dict):
            raise ProblemFileError(f"g entry {piece!r} is not an object")
    pieces = [gc.GPiece.from_dict(piece) for piece in g]
    try:
        problem = CompositeProblem(n, m, parse_expr(f0, n), tuple(parse_expr(s, n) for s in F), tuple(pieces))
    except CritMultError as exc:
        raise ProblemFileError(f"invalid expression: {exc}") from exc
    points = {}
    for key, pt in (d.get("points") or {}).items():
        if not isinstance(pt, dict) or "x" not in pt:
            raise ProblemFileError(f"point {key!r} needs an 'x' entry")
        y = pt.get("y")
        points[key] = {"x": _vector(pt["x"], n, f"points.{key}.x"),
                       "y": None if y is None else _vector(y, m, f"points.{key}.y")}
    return ProblemFile(problem, points, name)


def load(path) -> ProblemFile:
    """Read a problem file; bare names of the bundled instances also work."""
    path = Path(path)
    if not path.exists() and path.name in BUNDLED and len(path.parts) == 1:
        text = resources.files("critmult").joinpath("data").joinpath(path.name).read_text()
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(d, path.name)


def bundled(name: str) -> ProblemFile:
    return load(name)
