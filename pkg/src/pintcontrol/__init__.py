"""Parallel-in-time preconditioned solver for parabolic optimal control."""

from .errors import InvalidState, NumericBreakdown
from .kkt import ControlProblem, example1, example2
from .pcg import SolveReport, convergence_bound_check, pcg_solve
from .pipeline import SolveResult, solve
from .preconditioners import MscPreconditioner, PinTPreconditioner
from .spatial import SpatialGrid, SpatialOperator, shifted_solve
from .temporal import choose_alpha

__all__ = [
    "ControlProblem", "InvalidState", "MscPreconditioner", "NumericBreakdown", "PinTPreconditioner",
    "SolveReport", "SolveResult", "SpatialGrid", "SpatialOperator", "choose_alpha",
    "convergence_bound_check", "example1", "example2", "pcg_solve", "shifted_solve", "solve",
]
