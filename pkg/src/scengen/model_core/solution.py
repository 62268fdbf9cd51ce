from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Status(str, Enum):
    OPTIMAL = "optimal"
    GAP_MET = "feasible-gap-met"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time-limit"
    NODE_LIMIT = "node-limit"

    @property
    def has_solution(self) -> bool:
        return self in (Status.OPTIMAL, Status.GAP_MET)


@dataclass(frozen=True)
class SolveSettings:
    """Solver tolerances and limits.

    ``backend`` selects the embedded simplex / branch-and-bound (``"native"``)
    or HiGHS (``"highs"``); both honour the same contract.
    """

    gap: float = 0.01
    time_limit: float = 900.0
    int_tol: float = 1e-6
    pivot_tol: float = 1e-9
    node_limit: int = 1_000_000
    backend: str = "native"
    feas_tol: float = 1e-9

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("gap tolerance must be >= 0")
        if self.time_limit <= 0:
            raise ValueError("time limit must be > 0")
        if self.backend not in ("native", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def replace(self, **changes) -> "SolveSettings":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass
class Solution:
    status: Status
    objective: float = float("nan")
    x: np.ndarray | None = None
    gap: float = float("nan")
    nodes: int = 0
    wall_time: float = 0.0
    bound: float = float("nan")
    duals: np.ndarray | None = None
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status.has_solution

    def value(self, j: int) -> float:
        if self.x is None:
            raise ValueError(f"no primal values (status {self.status.value})")
        return float(self.x[j])


class SolverError(RuntimeError):
    pass


class DegeneratePivotError(SolverError):
    """Numerically singular basis; ``row`` is the offending constraint index."""

    def __init__(self, row: int, detail: str = ""):
        super().__init__(f"singular basis at constraint {row}{': ' + detail if detail else ''}")
        self.row = row
