"""HiGHS backend behind the same Model / Solution contract."""

from __future__ import annotations

import time

import highspy
import numpy as np

from .model import ModelArrays
from .solution import Solution, SolveSettings, Status

_STATUS = {
    highspy.HighsModelStatus.kOptimal: Status.OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: Status.INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: Status.UNBOUNDED,
    highspy.HighsModelStatus.kUnboundedOrInfeasible: Status.INFEASIBLE,
    highspy.HighsModelStatus.kTimeLimit: Status.TIME_LIMIT,
    highspy.HighsModelStatus.kSolutionLimit: Status.NODE_LIMIT,
    highspy.HighsModelStatus.kIterationLimit: Status.NODE_LIMIT,
}


def _configure(h: highspy.Highs, settings: SolveSettings, mip: bool) -> None:
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("time_limit", float(settings.time_limit))
    h.setOptionValue("primal_feasibility_tolerance", max(settings.feas_tol, 1e-10))
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    if mip:
        h.setOptionValue("mip_rel_gap", float(settings.gap))
        h.setOptionValue("mip_abs_gap", 1e-9)
        h.setOptionValue("mip_feasibility_tolerance", float(settings.int_tol))
        h.setOptionValue("mip_max_nodes", int(min(settings.node_limit, 2**31 - 1)))


def solve_arrays(arr: ModelArrays, settings: SolveSettings, mip: bool) -> Solution:
    t0 = time.perf_counter()
    h = highspy.Highs()
    _configure(h, settings, mip)
    lp = highspy.HighsLp()
    n = arr.c.size
    m = arr.row_lo.size
    lp.num_col_ = n
    lp.num_row_ = m
    lp.col_cost_ = arr.c
    lp.col_lower_ = arr.lb
    lp.col_upper_ = arr.ub
    lp.row_lower_ = arr.row_lo
    lp.row_upper_ = arr.row_hi
    csc = arr.A.tocsc()
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
    lp.a_matrix_.index_ = csc.indices.astype(np.int32)
    lp.a_matrix_.value_ = csc.data.astype(float)
    if mip and arr.binary.any():
        lp.integrality_ = [highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                           for b in arr.binary]
    h.passModel(lp)
    return _collect(h, arr, t0, mip and bool(arr.binary.any()))


def solve_mps_file(path: str, settings: SolveSettings) -> Solution:
    """Solve an MPS file read by HiGHS itself (external cross-check path)."""
    t0 = time.perf_counter()
    h = highspy.Highs()
    _configure(h, settings, True)
    h.readModel(str(path))
    return _collect(h, None, t0, True)


def _collect(h: highspy.Highs, arr: ModelArrays | None, t0: float, mip: bool) -> Solution:
    h.run()
    model_status = h.getModelStatus()
    status = _STATUS.get(model_status, Status.INFEASIBLE)
    info = h.getInfo()
    nodes = int(info.mip_node_count) if mip else 0
    wall = time.perf_counter() - t0
    has_primal = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if status is Status.INFEASIBLE or status is Status.UNBOUNDED:
        return Solution(status, nodes=nodes, wall_time=wall)
    if not has_primal:
        return Solution(status, nodes=nodes, wall_time=wall)
    x = np.array(h.getSolution().col_value, dtype=float)
    obj = float(info.objective_function_value)
    gap = float(info.mip_gap) if mip else 0.0
    bound = float(info.mip_dual_bound) if mip else obj
    if arr is not None:
        # highs minimised the sign-adjusted objective; report in model sense
        obj = arr.obj_sign * obj + arr.obj_constant
        bound = arr.obj_sign * bound + arr.obj_constant
    if status is Status.OPTIMAL and mip and gap > 1e-9:
        status = Status.GAP_MET
    duals = None if mip else np.array(h.getSolution().row_dual, dtype=float)
    return Solution(status, objective=obj, x=x, gap=gap if np.isfinite(gap) else 0.0, nodes=nodes,
                    wall_time=wall, bound=bound, duals=duals)
