"""Best-bound branch-and-bound over binaries, LP relaxations by the embedded simplex."""

from __future__ import annotations

import heapq
import itertools
import logging
import time

import numpy as np

from .model import ModelArrays
from .simplex import simplex
from .solution import Solution, SolveSettings, Status

log = logging.getLogger(__name__)


def relative_gap(incumbent: float, bound: float) -> float:
    """Gap of a minimisation incumbent against a lower bound."""
    diff = incumbent - bound
    if diff <= 1e-9:
        return 0.0
    return diff / max(abs(incumbent), 1e-10)


def branch_and_bound(arr: ModelArrays, settings: SolveSettings) -> Solution:
    t0 = time.perf_counter()
    deadline = t0 + settings.time_limit
    A = arr.A.toarray()
    binaries = np.flatnonzero(arr.binary)
    lb0 = arr.lb.copy()
    ub0 = arr.ub.copy()
    lb0[binaries] = np.ceil(lb0[binaries] - settings.int_tol)
    ub0[binaries] = np.floor(ub0[binaries] + settings.int_tol)

    def relax(lb, ub):
        return simplex(A, arr.c, lb, ub, arr.row_lo, arr.row_hi, settings, deadline)

    incumbent_x = None
    incumbent = np.inf
    nodes = 0
    counter = itertools.count()
    root = relax(lb0, ub0)
    nodes += 1
    if root.status is Status.INFEASIBLE:
        return Solution(Status.INFEASIBLE, nodes=nodes, wall_time=time.perf_counter() - t0)
    if root.status is Status.UNBOUNDED:
        return Solution(Status.UNBOUNDED, nodes=nodes, wall_time=time.perf_counter() - t0)
    heap: list = []
    if root.status is Status.OPTIMAL:
        heapq.heappush(heap, (root.objective, next(counter), lb0, ub0, root))
    limit_status = Status.TIME_LIMIT if root.status is Status.TIME_LIMIT else None

    def finish(status: Status) -> Solution:
        wall = time.perf_counter() - t0
        bound = heap[0][0] if heap else incumbent
        bound = min(bound, incumbent)
        if incumbent_x is None:
            return Solution(status, nodes=nodes, wall_time=wall,
                            bound=arr.obj_sign * bound + arr.obj_constant if heap else float("nan"))
        obj = arr.obj_sign * incumbent + arr.obj_constant
        gap = relative_gap(incumbent, bound)
        return Solution(status, objective=obj, x=incumbent_x, gap=gap, nodes=nodes,
                        wall_time=wall, bound=arr.obj_sign * bound + arr.obj_constant)

    while heap:
        bound = heap[0][0]
        if incumbent_x is not None and relative_gap(incumbent, bound) <= settings.gap:
            proven = bound >= incumbent - 1e-9
            return finish(Status.OPTIMAL if proven else Status.GAP_MET)
        if time.perf_counter() > deadline:
            limit_status = Status.TIME_LIMIT
            break
        if nodes >= settings.node_limit:
            limit_status = Status.NODE_LIMIT
            break
        node_bound, _, lb, ub, sol = heapq.heappop(heap)
        if node_bound >= incumbent - 1e-9:
            continue
        x = sol.x
        frac = np.abs(x[binaries] - np.round(x[binaries]))
        frac[frac <= settings.int_tol] = 0.0
        if not frac.any():
            incumbent, incumbent_x = node_bound, x.copy()
            incumbent_x[binaries] = np.round(incumbent_x[binaries])
            log.debug("incumbent %.6g at node %d", incumbent, nodes)
            continue
        # most fractional; lowest index on ties
        j = int(binaries[np.argmax(frac)])
        for value in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = value
            child = relax(clb, cub)
            nodes += 1
            if child.status is Status.OPTIMAL and child.objective < incumbent - 1e-9:
                heapq.heappush(heap, (child.objective, next(counter), clb, cub, child))
            elif child.status is Status.TIME_LIMIT:
                limit_status = Status.TIME_LIMIT
    if limit_status is None:
        if incumbent_x is None:
            return Solution(Status.INFEASIBLE, nodes=nodes, wall_time=time.perf_counter() - t0)
        return finish(Status.OPTIMAL)
    return finish(limit_status)
