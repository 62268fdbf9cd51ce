from __future__ import annotations

import logging
import time

from .branch_bound import branch_and_bound
from .model import Model, ModelError
from .simplex import simplex
from .solution import Solution, SolveSettings, Status

log = logging.getLogger(__name__)


def solve_lp(model: Model, settings: SolveSettings | None = None) -> Solution:
    """Solve a purely continuous model to an optimal basic solution."""
    settings = settings or SolveSettings()
    if model.n_binaries or model.sos2_groups:
        raise ModelError("solve_lp requires a model without binaries or SOS2 groups")
    arr = model.arrays()
    if settings.backend == "highs":
        from .highs_backend import solve_arrays
        return solve_arrays(arr, settings, mip=False)
    sol = simplex(arr.A, arr.c, arr.lb, arr.ub, arr.row_lo, arr.row_hi, settings)
    if sol.x is not None:
        sol.objective = arr.obj_sign * sol.objective + arr.obj_constant
        sol.bound = sol.objective
        if sol.duals is not None:
            sol.duals = arr.obj_sign * sol.duals
    return sol


def solve_milp(model: Model, settings: SolveSettings | None = None) -> Solution:
    """Branch-and-bound over the model's binaries (SOS2 groups must be pre-encoded)."""
    settings = settings or SolveSettings()
    model.validate()
    arr = model.arrays()
    t0 = time.perf_counter()
    if settings.backend == "highs":
        from .highs_backend import solve_arrays
        sol = solve_arrays(arr, settings, mip=True)
    else:
        sol = branch_and_bound(arr, settings)
    log.info("solved %s: %d rows, %d cols, %d binaries -> %s obj=%.6g gap=%.4g nodes=%d (%.2fs)",
             model.name, model.n_cons, model.n_vars, model.n_binaries, sol.status.value,
             sol.objective, sol.gap, sol.nodes, time.perf_counter() - t0)
    return sol


def solve(model: Model, settings: SolveSettings | None = None) -> Solution:
    if model.n_binaries:
        return solve_milp(model, settings)
    return solve_lp(model, settings)


__all__ = ["solve_lp", "solve_milp", "solve", "Status"]
