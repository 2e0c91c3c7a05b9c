"""Linear programs over rotated second-order cones and an embedded solver."""

from .ipm import solve
from .program import (
    CONST,
    ConicProgram,
    ProgramBuilder,
    Residuals,
    RotatedCone,
    SolverSolution,
    Status,
    ToleranceSet,
    dump_program,
    load_program,
    primal_residuals,
)

__all__ = [
    "CONST",
    "ConicProgram",
    "ProgramBuilder",
    "Residuals",
    "RotatedCone",
    "SolverSolution",
    "Status",
    "ToleranceSet",
    "dump_program",
    "load_program",
    "primal_residuals",
    "solve",
]
