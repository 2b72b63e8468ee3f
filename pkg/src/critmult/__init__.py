"""critmult: multipliers, criticality and Newton-type solvers for composite programs.

The problems have the form ``min f0(x) + g(F(x))`` where ``f0`` and ``F`` are
smooth expressions and ``g`` is a separable sum of one-dimensional polyhedral
pieces (indicators of ``{0}``, ``R_-`` and boxes, absolute values, convex
piecewise affine functions and the nonconvex ``l0`` penalty).
"""

from .errors import CritMultError
from .gcatalog import GPiece
from .smoothfn import parse_expr
from .stationarity import CompositeProblem, Params, PointPD, check_cq, multiplier_polytope
from .criticality import (check_noncritical, check_uniqueness_cond, search_critical_multiplier,
                          verdict_ic_M, verdict_ic_M1)
from .ssnewton import SolverOptions, solve_ge
from .newtonclassic import newton_kkt
from .problemfile import ProblemFile, load

__version__ = "0.1.0"

__all__ = [
    "CritMultError", "GPiece", "parse_expr", "CompositeProblem", "Params", "PointPD", "check_cq",
    "multiplier_polytope", "check_noncritical", "check_uniqueness_cond", "search_critical_multiplier",
    "verdict_ic_M", "verdict_ic_M1", "SolverOptions", "solve_ge", "newton_kkt", "ProblemFile", "load",
]
