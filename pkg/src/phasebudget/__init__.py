"""Budget allocation across pipeline phases.

Fit saturating utility curves from two elicited operating points, then
split a budget across phases by water-filling on the dual price.
"""

from .curves import (
    OperatingPoints,
    PhaseCurve,
    PhasePricing,
    eval_f,
    eval_f_prime,
    eval_g,
    fit_two_point,
)
from .errors import (
    DomainError,
    ParseError,
    PhaseBudgetError,
    ResourceLimitError,
    SolverError,
    ValidationError,
)
from .objectives import (
    Objective,
    ObjectiveKind,
    evaluate,
    evaluate_log,
    phase_response,
    starvation_threshold,
)
from .solver import (
    Allocation,
    SolveConfig,
    grid_oracle,
    reallocate,
    solve,
    solve_log_transformed,
    total_response,
)

__version__ = "0.1.0"

__all__ = [
    "OperatingPoints",
    "PhaseCurve",
    "PhasePricing",
    "eval_f",
    "eval_f_prime",
    "eval_g",
    "fit_two_point",
    "DomainError",
    "ParseError",
    "PhaseBudgetError",
    "ResourceLimitError",
    "SolverError",
    "ValidationError",
    "Objective",
    "ObjectiveKind",
    "evaluate",
    "evaluate_log",
    "phase_response",
    "starvation_threshold",
    "Allocation",
    "SolveConfig",
    "grid_oracle",
    "reallocate",
    "solve",
    "solve_log_transformed",
    "total_response",
]
