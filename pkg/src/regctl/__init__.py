"""Regularity analysis of optimization-based controllers.

Controllers are parametric quadratic programs ``u*(x) = argmin_u 1/2 u'Q(x)u + c(x)'u``
subject to ``A(x) u >= b(x)`` with polynomial data.  The package solves them
pointwise, checks constraint qualifications, probes the regularity of
``x -> u*(x)`` by sampling, and simulates and monitors the closed loop.
"""

from regctl.model import ControlAffineSystem, ParametricQp, ProblemSpecError, load_problem
from regctl.poly import PolyExpr, parse_poly
from regctl.solver import evaluate_controller, solve_qp

__version__ = "0.1.0"

__all__ = [
    "ControlAffineSystem",
    "ParametricQp",
    "PolyExpr",
    "ProblemSpecError",
    "evaluate_controller",
    "load_problem",
    "parse_poly",
    "solve_qp",
]
