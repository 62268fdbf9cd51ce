"""Model container, embedded LP/MILP solvers, SOS2 encoding and MPS I/O."""

from .model import INF, Constraint, Model, ModelError, Sense, Variable, VarKind, encode_sos2
from .mps import read_mps, write_mps
from .solution import DegeneratePivotError, Solution, SolverError, SolveSettings, Status
from .solve import solve, solve_lp, solve_milp

__all__ = [
    "INF", "Constraint", "Model", "ModelError", "Sense", "Variable", "VarKind", "encode_sos2",
    "read_mps", "write_mps", "DegeneratePivotError", "Solution", "SolverError", "SolveSettings",
    "Status", "solve", "solve_lp", "solve_milp",
]
