"""Inexact fixed point iterations with Krylov inner solvers.

Library plus experiment harness for studying how the termination criterion
of an inner iterative linear solver controls the error of an outer fixed
point iteration, with the Picard iteration and the Dirichlet-Neumann
coupling of a transmission problem as the worked applications.
"""

from .fixedpoint import (
    FixedPointTrace,
    LipschitzData,
    NotAContractionError,
    PerturbationSchedule,
    StagnatedTraceError,
    Termination,
    bound_direct,
    bound_nested,
    derived_schedule_from_LS,
    estimate_lipschitz,
    iterate_nested,
    iterate_perturbed,
    iterate_plain,
)
from .krylov import (
    CriterionKind,
    SolveReport,
    TerminationCriterion,
    absolute,
    cg_solve,
    evaluate_criterion,
    gmres_solve,
    relative_to_initial,
    relative_to_rhs,
)
from .linalg import (
    ConditionEstimate,
    DimensionMismatchError,
    SingularMatrixError,
    condition_estimate,
    matvec,
    norm2,
    solve_direct,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionEstimate",
    "CriterionKind",
    "DimensionMismatchError",
    "FixedPointTrace",
    "LipschitzData",
    "NotAContractionError",
    "PerturbationSchedule",
    "SingularMatrixError",
    "SolveReport",
    "StagnatedTraceError",
    "Termination",
    "TerminationCriterion",
    "absolute",
    "bound_direct",
    "bound_nested",
    "cg_solve",
    "condition_estimate",
    "derived_schedule_from_LS",
    "estimate_lipschitz",
    "evaluate_criterion",
    "gmres_solve",
    "iterate_nested",
    "iterate_perturbed",
    "iterate_plain",
    "matvec",
    "norm2",
    "relative_to_initial",
    "relative_to_rhs",
    "solve_direct",
    "__version__",
]
