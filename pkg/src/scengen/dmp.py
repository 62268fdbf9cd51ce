"""Distribution & moment matching scenario reduction as a MILP.

One original scenario is selected per cluster; its probability and the
deviations in moments, covariance and ECDF are continuous variables. The
weighted error terms are aggregated with the L1 or L-infinity norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model_core import Model, Sense, Solution, SolveSettings, Status, VarKind, solve_lp, solve_milp
from .sampling.kmeans import ClusterAssignment
from .stats import NORMS, ErrorReport, ScenarioSet, StatSummary, Weights, recompute_errors

log = logging.getLogger(__name__)

TERMS = ("SM", "ECDF", "COV")
MODES = ("full", "omit-SM", "omit-COV", "omit-ECDF")
DENOM_EPS = 1e-12
MAX_ESCALATED_NODES = 100_000


class DmpError(RuntimeError):
    pass


class DmpInfeasible(DmpError):
    def __init__(self, mode: str, hint: str = ""):
        super().__init__(f"DMP model infeasible (mode {mode}){'; ' + hint if hint else ''}")
        self.mode = mode


class IntegralityError(DmpError):
    pass


@dataclass
class ReductionConfig:
    k: int
    norm: str = "L1"
    w_sm: float | np.ndarray = 1.0
    w_cov: float | np.ndarray = 1.0
    w_ecdf: float | np.ndarray = 1.0
    p_min: float = 1e-3
    p_max: float = 1.0
    exact_mean: bool = True
    mean_fallback: bool = True
    ecdf_form: str = "cumulative"
    polish_passes: int = 2
    settings: SolveSettings = field(default_factory=SolveSettings)

    def __post_init__(self):
        if self.ecdf_form not in ("dense", "cumulative"):
            raise ValueError("ecdf_form must be 'dense' or 'cumulative'")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if not 0 <= self.p_min <= self.p_max <= 1:
            raise ValueError("need 0 <= p_min <= p_max <= 1")
        if self.k * self.p_min > 1 + 1e-12 or self.k * self.p_max < 1 - 1e-12:
            raise ValueError(f"K={self.k} incompatible with probability bounds [{self.p_min}, {self.p_max}]")
        for w in (self.w_sm, self.w_cov, self.w_ecdf):
            if np.any(np.asarray(w) < 0):
                raise ValueError("weights must be nonnegative")

    def scaled(self, factor: float) -> "ReductionConfig":
        from dataclasses import replace
        return replace(self, w_sm=np.asarray(self.w_sm) * factor, w_cov=np.asarray(self.w_cov) * factor,
                       w_ecdf=np.asarray(self.w_ecdf) * factor)


def effective_weights(config: ReductionConfig, target: StatSummary) -> Weights:
    """Normalise raw moment / covariance weights by the target magnitudes."""
    n_par = target.moments.shape[0]
    raw_sm = np.broadcast_to(np.asarray(config.w_sm, dtype=float), (n_par, 4))
    raw_cov = np.broadcast_to(np.asarray(config.w_cov, dtype=float), (n_par, n_par))
    raw_ecdf = np.broadcast_to(np.asarray(config.w_ecdf, dtype=float), (n_par,)).copy()
    flags: list[str] = []
    denom = np.abs(target.moments)
    small = denom < DENOM_EPS
    for i, m in zip(*np.nonzero(small)):
        flags.append(f"SM[{target.names[i]}][{m + 1}]")
    sm = raw_sm / np.where(small, 1.0, denom)
    cov = np.zeros((n_par, n_par))
    for i in range(n_par):
        for j in range(i + 1, n_par):
            c = abs(target.covariance[i, j])
            if c < DENOM_EPS:
                flags.append(f"COV[{target.names[i]}][{target.names[j]}]")
                c = 1.0
            cov[i, j] = raw_cov[i, j] / c
    if flags:
        log.warning("zero target magnitude, raw weight used for %s", ", ".join(flags))
    return Weights(sm, cov, raw_ecdf, flags)


@dataclass
class DmpModelHandle:
    model: Model
    mode: str
    norm: str
    weights: Weights
    exact_mean: bool
    labels: np.ndarray
    y: dict[tuple[int, int], int]
    p: dict[tuple[int, int], int]
    d_plus: np.ndarray
    d_minus: np.ndarray
    c_plus: dict[tuple[int, int], int]
    c_minus: dict[tuple[int, int], int]
    phi: np.ndarray
    e: np.ndarray
    pi: dict[str, int]
    k: int

    @property
    def included(self) -> tuple[str, ...]:
        if self.mode == "full":
            return TERMS
        return tuple(t for t in TERMS if t != self.mode.split("-", 1)[1])


def _check_inputs(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
                  config: ReductionConfig) -> None:
    if clusters.labels.size != originals.n_scenarios:
        raise DmpError("cluster labels do not cover the original scenarios")
    if clusters.k != config.k:
        raise DmpError(f"clustering has {clusters.k} groups but K={config.k}")
    if target.ecdf.shape != originals.values.shape:
        raise DmpError("target ECDF must be evaluated at the original scenarios")
    if any(len(g) == 0 for g in clusters.groups()):
        raise DmpError("empty cluster")


def build_core(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
               config: ReductionConfig, exact_mean: bool | None = None, name: str = "dmp") -> DmpModelHandle:
    """All selection, probability and deviation constraints, without an objective."""
    _check_inputs(target, originals, clusters, config)
    exact_mean = config.exact_mean if exact_mean is None else exact_mean
    weights = effective_weights(config, target)
    X = originals.values
    N, I = X.shape
    K = config.k
    D = target.moments
    C = target.covariance
    labels = np.asarray(clusters.labels, dtype=int)
    model = Model(name)

    order = [(k, int(n)) for k in range(K) for n in clusters.members(k)]
    y = {kn: model.add_var(f"y_{kn[0]}_{kn[1]}", 0, 1, VarKind.BINARY) for kn in order}
    p = {kn: model.add_var(f"p_{kn[0]}_{kn[1]}", 0, 1) for kn in order}
    p_of_n = np.empty(N, dtype=np.int64)
    y_of_n = np.empty(N, dtype=np.int64)
    for (k, n), j in p.items():
        p_of_n[n] = j
        y_of_n[n] = y[(k, n)]

    mean_ub = 0.0 if exact_mean else np.inf
    d_plus = np.empty((I, 4), dtype=np.int64)
    d_minus = np.empty((I, 4), dtype=np.int64)
    for i in range(I):
        for m in range(4):
            ub = mean_ub if m == 0 else np.inf
            d_plus[i, m] = model.add_var(f"dp_{i}_{m + 1}", 0, ub)
            d_minus[i, m] = model.add_var(f"dm_{i}_{m + 1}", 0, ub)
    pairs = [(i, j) for i in range(I) for j in range(i + 1, I)]
    c_plus = {ij: model.add_var(f"cp_{ij[0]}_{ij[1]}") for ij in pairs}
    c_minus = {ij: model.add_var(f"cm_{ij[0]}_{ij[1]}") for ij in pairs}
    phi = np.array([[model.add_var(f"phi_{i}_{n}", -1, 1) for i in range(I)] for n in range(N)],
                   dtype=np.int64).reshape(N, I)
    e = np.array([model.add_var(f"e_{i}") for i in range(I)], dtype=np.int64)
    pi = {t: model.add_var(f"pi_{t}") for t in TERMS}

    for k in range(K):
        members = clusters.members(k)
        model.add_row(y_of_n[members], np.ones(members.size), Sense.EQ, 1.0, f"select_{k}")
    for n in range(N):
        model.add_row(y_of_n[[n]], np.ones(1), Sense.LE, 1.0, f"once_{n}")
    for n in range(N):
        model.add_row(np.array([p_of_n[n], y_of_n[n]]), np.array([1.0, -config.p_min]), Sense.GE, 0.0, f"pmin_{n}")
        model.add_row(np.array([p_of_n[n], y_of_n[n]]), np.array([1.0, -config.p_max]), Sense.LE, 0.0, f"pmax_{n}")
    model.add_row(p_of_n, np.ones(N), Sense.EQ, 1.0, "total_prob")

    dev = X - D[:, 0]
    for i in range(I):
        for m in range(4):
            coef = X[:, i] if m == 0 else dev[:, i] ** (m + 1)
            idx = np.concatenate([p_of_n, [d_plus[i, m], d_minus[i, m]]])
            val = np.concatenate([coef, [1.0, -1.0]])
            model.add_row(idx, val, Sense.EQ, float(D[i, m]), f"moment_{i}_{m + 1}")
    for (i, j) in pairs:
        idx = np.concatenate([p_of_n, [c_plus[(i, j)], c_minus[(i, j)]]])
        val = np.concatenate([dev[:, i] * dev[:, j], [1.0, -1.0]])
        model.add_row(idx, val, Sense.EQ, float(C[i, j]), f"cov_{i}_{j}")

    for i in range(I):
        col = X[:, i]
        srt = np.argsort(col, kind="stable")
        last = np.searchsorted(col[srt], col, side="right")
        if config.ecdf_form == "cumulative":
            # q_r = probability mass of the r+1 smallest values; q_r = q_{r-1} + p_{srt[r]}
            q = np.array([model.add_var(f"cum_{i}_{r}", 0, 1) for r in range(N)], dtype=np.int64)
            for r in range(N):
                idx = [q[r], p_of_n[srt[r]]] + ([q[r - 1]] if r else [])
                val = [1.0, -1.0] + ([-1.0] if r else [])
                model.add_row(np.array(idx), np.array(val), Sense.EQ, 0.0, f"cum_{i}_{r}")
        for n in range(N):
            if config.ecdf_form == "cumulative":
                idx = np.array([phi[n, i], y_of_n[n], q[last[n] - 1]])
                val = np.array([1.0, -float(target.ecdf[n, i]), 1.0])
            else:
                below = p_of_n[srt[:last[n]]]
                idx = np.concatenate([[phi[n, i], y_of_n[n]], below])
                val = np.concatenate([[1.0, -float(target.ecdf[n, i])], np.ones(below.size)])
            model.add_row(idx, val, Sense.EQ, 0.0, f"ecdf_{i}_{n}")
        for n in range(N):
            model.add_row(np.array([e[i], phi[n, i], y_of_n[n]]), np.array([1.0, -1.0, -1.0]),
                          Sense.GE, -1.0, f"eup_{i}_{n}")
            model.add_row(np.array([e[i], phi[n, i], y_of_n[n]]), np.array([1.0, 1.0, -1.0]),
                          Sense.GE, -1.0, f"elo_{i}_{n}")

    W = weights
    if config.norm == "L1":
        sm_idx, sm_val = [], []
        for i in range(I):
            for m in range(4):
                if W.sm[i, m]:
                    sm_idx += [d_plus[i, m], d_minus[i, m]]
                    sm_val += [-W.sm[i, m], -W.sm[i, m]]
        model.add_row(np.array([pi["SM"], *sm_idx]), np.array([1.0, *sm_val]), Sense.EQ, 0.0, "def_SM")
        cv_idx, cv_val = [], []
        for ij in pairs:
            if W.cov[ij]:
                cv_idx += [c_plus[ij], c_minus[ij]]
                cv_val += [-W.cov[ij], -W.cov[ij]]
        model.add_row(np.array([pi["COV"], *cv_idx]), np.array([1.0, *cv_val]), Sense.EQ, 0.0, "def_COV")
        ec = [i for i in range(I) if W.ecdf[i]]
        model.add_row(np.array([pi["ECDF"], *e[ec]]), np.array([1.0, *(-W.ecdf[ec])]), Sense.EQ, 0.0, "def_ECDF")
    else:
        for i in range(I):
            for m in range(4):
                if W.sm[i, m]:
                    model.add_row(np.array([pi["SM"], d_plus[i, m], d_minus[i, m]]),
                                  np.array([1.0, -W.sm[i, m], -W.sm[i, m]]), Sense.GE, 0.0, f"def_SM_{i}_{m + 1}")
        for ij in pairs:
            if W.cov[ij]:
                model.add_row(np.array([pi["COV"], c_plus[ij], c_minus[ij]]),
                              np.array([1.0, -W.cov[ij], -W.cov[ij]]), Sense.GE, 0.0, f"def_COV_{ij[0]}_{ij[1]}")
        for i in range(I):
            if W.ecdf[i]:
                model.add_row(np.array([pi["ECDF"], e[i]]), np.array([1.0, -W.ecdf[i]]), Sense.GE, 0.0,
                              f"def_ECDF_{i}")

    return DmpModelHandle(model, "full", config.norm, weights, exact_mean, labels, y, p, d_plus, d_minus,
                          c_plus, c_minus, phi, e, pi, K)


def build_dmp(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
              config: ReductionConfig, mode: str = "full", exact_mean: bool | None = None) -> DmpModelHandle:
    """Weighted-sum DMP: minimise the sum of the included error terms."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    handle = build_core(target, originals, clusters, config, exact_mean, name=f"dmp_{mode}")
    handle.mode = mode
    handle.model.set_objective({handle.pi[t]: 1.0 for t in handle.included})
    return handle


def restrict(target: StatSummary, originals: ScenarioSet, selection: Sequence[int]
             ) -> tuple[StatSummary, ScenarioSet, ClusterAssignment]:
    """The DMP data seen by a fixed selection: kept scenarios as singleton clusters.

    Rows of unselected scenarios are vacuous once ``y`` is fixed, so the
    restricted model has the same optimal probabilities and errors.
    """
    sel = np.asarray(selection, dtype=int)
    sub = ScenarioSet.equiprobable(originals.values[sel], list(originals.names))
    tgt = replace(target, ecdf=target.ecdf[sel])
    return tgt, sub, ClusterAssignment(np.arange(sel.size), originals.values[sel].copy())


def fix_selection(model: Model) -> Model:
    """Turn the (all selected) binaries of a restricted model into fixed continuous columns."""
    for v in model.variables:
        if v.kind is VarKind.BINARY:
            v.kind, v.lb, v.ub = VarKind.CONTINUOUS, 1.0, 1.0
    return model


def local_search(selection: np.ndarray, clusters: ClusterAssignment, evaluate, minimize: bool,
                 max_passes: int = 2, tol: float = 1e-9) -> tuple[np.ndarray, float | None]:
    """Best-improvement swap search: replace one cluster's pick at a time.

    ``evaluate(selection)`` returns the objective or None when infeasible.
    Candidates are scanned in cluster order then index order, so ties keep
    the earlier (smaller) index.
    """
    sel = np.asarray(selection, dtype=int).copy()
    cur = evaluate(sel)
    if cur is None:
        return sel, None
    sign = 1.0 if minimize else -1.0
    for _ in range(max_passes):
        improved = False
        for k in range(clusters.k):
            best_v, best_n = cur, sel[k]
            for n in clusters.members(k):
                if n == sel[k]:
                    continue
                cand = sel.copy()
                cand[k] = n
                v = evaluate(cand)
                if v is not None and sign * (best_v - v) > tol * max(1.0, abs(best_v)):
                    best_v, best_n = v, n
            if best_n != sel[k]:
                sel[k], cur, improved = best_n, best_v, True
        if not improved:
            break
    return sel, cur


def extract_scenarios(handle: DmpModelHandle, solution: Solution, originals: ScenarioSet,
                      int_tol: float = 1e-6) -> tuple[ScenarioSet, np.ndarray]:
    """Kept scenarios (one per cluster, in cluster order) and their original indices."""
    if solution.x is None:
        raise DmpError(f"no solution values (status {solution.status.value})")
    x = solution.x
    selection = np.full(handle.k, -1)
    probs = np.zeros(handle.k)
    for (k, n), j in handle.y.items():
        v = x[j]
        if min(abs(v), abs(v - 1)) > int_tol:
            raise IntegralityError(f"y_{k}_{n} = {v:.3e} is not integral")
        if v > 0.5:
            if selection[k] >= 0:
                raise IntegralityError(f"cluster {k} selects more than one scenario")
            selection[k] = n
            probs[k] = x[handle.p[(k, n)]]
    if np.any(selection < 0):
        raise IntegralityError("a cluster has no selected scenario")
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise DmpError(f"kept probabilities sum to {total:.9f}")
    probs = np.clip(probs, 0.0, None) / probs.clip(0.0, None).sum()
    values = originals.values[selection]
    return ScenarioSet(values, probs, list(originals.names)), selection


def solver_errors(handle: DmpModelHandle, solution: Solution, selection: Sequence[int]) -> dict:
    """Deviation values as reported by the solver's own variables."""
    x = solution.x
    I = handle.d_plus.shape[0]
    net_moment = x[handle.d_minus] - x[handle.d_plus]  # value - target
    net_cov = np.zeros((I, I))
    for ij, j in handle.c_plus.items():
        net_cov[ij] = x[handle.c_minus[ij]] - x[j]
    sel = np.asarray(selection, dtype=int)
    phi = x[handle.phi[sel, :]]
    return {
        "moment": net_moment,
        "covariance": net_cov,
        "phi": phi,
        "e": np.abs(phi).max(axis=0),
        "pi": {t: float(x[j]) for t, j in handle.pi.items()},
    }


@dataclass
class Diagnostics:
    n_scenarios: int
    expected: int
    distinct_values: list[int]
    duplicate_pairs: list[tuple[int, int]]
    low_probability: list[int]
    near_min: int = 0

    @property
    def clean(self) -> bool:
        return (self.n_scenarios == self.expected and not self.duplicate_pairs
                and not self.low_probability)

    def to_json(self) -> dict:
        return {
            "n_scenarios": self.n_scenarios,
            "expected": self.expected,
            "distinct_values": self.distinct_values,
            "duplicate_pairs": [list(p) for p in self.duplicate_pairs],
            "low_probability": self.low_probability,
            "near_min": self.near_min,
            "clean": self.clean,
        }


def diagnose(scen: ScenarioSet, k: int, p_min: float = 1e-3, tol: float = 1e-9) -> Diagnostics:
    """Flag repeated scenario vectors and (near-)zero probabilities.

    ``low_probability`` lists scenarios strictly below ``p_min`` (a bound
    violation); ``near_min`` counts kept scenarios with ``p < p_min + tol``,
    i.e. sitting on the lower bound.
    """
    X = scen.values
    distinct = [int(np.unique(X[:, i]).size) for i in range(scen.n_params)]
    dup = [(a, b) for a in range(scen.n_scenarios) for b in range(a + 1, scen.n_scenarios)
           if np.array_equal(X[a], X[b])]
    low = [int(n) for n in np.flatnonzero(scen.probs < p_min - tol)]
    near = int(np.count_nonzero(scen.probs < p_min + tol))
    return Diagnostics(scen.n_scenarios, k, distinct, dup, low, near)


@dataclass
class DmpResult:
    handle: DmpModelHandle
    solution: Solution
    scenarios: ScenarioSet
    selection: np.ndarray
    errors: ErrorReport
    exact_mean: bool

    def report(self) -> dict:
        return {
            "mode": self.handle.mode,
            "norm": self.handle.norm,
            "exact_mean": self.exact_mean,
            "status": self.solution.status.value,
            "objective": self.solution.objective,
            "gap": self.solution.gap,
            "nodes": self.solution.nodes,
            "selection": self.selection.tolist(),
            "model_size": self.handle.model.summary(),
            "errors": self.errors.to_json(),
            "weight_flags": self.handle.weights.flags,
        }


def _polish(handle: DmpModelHandle, sol: Solution, selection: np.ndarray, target: StatSummary,
            originals: ScenarioSet, clusters: ClusterAssignment, rebuild, settings: SolveSettings,
            passes: int) -> Solution:
    """Swap search on the selection, then one full-model solve with ``y`` fixed.

    The fixed-``y`` solve also runs when the search keeps the incumbent's
    selection: a gap-limited incumbent may leave probabilities (and, under
    L-infinity, the epigraph error variables) short of their best values for
    that selection.
    """
    minimize = not handle.model.maximize

    def evaluate(sel):
        t_r, o_r, c_r = restrict(target, originals, sel)
        r = solve_lp(fix_selection(rebuild(t_r, o_r, c_r)), settings)
        return r.objective if r.ok else None

    new_sel, value = local_search(selection, clusters, evaluate, minimize, passes)
    if value is None:
        new_sel = selection
    fixed = handle.model.copy()
    chosen = {(k, int(n)) for k, n in enumerate(new_sel)}
    for kn, j in handle.y.items():
        v = 1.0 if kn in chosen else 0.0
        fixed.set_bounds(j, v, v)
    fsol = solve_milp(fixed, settings.replace(gap=0.0))
    sign = 1.0 if minimize else -1.0
    if fsol.x is None or sign * (fsol.objective - sol.objective) > 0:
        return sol
    from .model_core.branch_bound import relative_gap
    gap = relative_gap(sign * fsol.objective, sign * sol.bound) if np.isfinite(sol.bound) else sol.gap
    moved = not np.array_equal(new_sel, selection)
    log.info("%s: %s %.6g -> %.6g", handle.model.name,
             "swap search improved objective" if moved else "fixed-selection re-solve", sol.objective, fsol.objective)
    return Solution(sol.status, objective=fsol.objective, x=fsol.x, gap=gap, nodes=sol.nodes,
                    wall_time=sol.wall_time + fsol.wall_time, bound=sol.bound,
                    message="improved by swap search" if moved else "re-solved with selection fixed")


def solve_handle(handle: DmpModelHandle, originals: ScenarioSet, target: StatSummary,
                 settings: SolveSettings, clusters: ClusterAssignment | None = None,
                 rebuild=None, polish_passes: int = 0) -> DmpResult:
    """Solve, optionally improve the incumbent by swap search, extract and re-evaluate.

    ``rebuild(target, originals, clusters)`` must assemble the same model
    family for restricted data; it is only needed when ``polish_passes > 0``.
    """
    sol = solve_milp(handle.model, settings)
    limit = settings.node_limit
    while sol.x is None and sol.status is Status.NODE_LIMIT and limit < MAX_ESCALATED_NODES:
        # no incumbent yet: widen the node budget deterministically
        limit = min(limit * 10, MAX_ESCALATED_NODES)
        log.info("%s: no incumbent, retrying with node limit %d", handle.model.name, limit)
        sol = solve_milp(handle.model, settings.replace(node_limit=limit))
    if sol.status is Status.INFEASIBLE:
        raise DmpInfeasible(handle.mode)
    if sol.x is None:
        raise DmpError(f"{handle.model.name}: no incumbent ({sol.status.value})")
    scen, sel = extract_scenarios(handle, sol, originals, settings.int_tol)
    if polish_passes > 0 and rebuild is not None and clusters is not None and sol.status is not Status.OPTIMAL:
        sol = _polish(handle, sol, sel, target, originals, clusters, rebuild, settings, polish_passes)
        scen, sel = extract_scenarios(handle, sol, originals, settings.int_tol)
    errs = recompute_errors(target, scen, sel, handle.weights, handle.norm)
    return DmpResult(handle, sol, scen, sel, errs, handle.exact_mean)


def reduce(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
           config: ReductionConfig, mode: str = "full") -> DmpResult:
    """Build and solve the DMP; exact-mean falls back to the soft mean when infeasible."""
    def attempt(exact):
        handle = build_dmp(target, originals, clusters, config, mode, exact_mean=exact)

        def rebuild(t, o, c):
            return build_dmp(t, o, c, replace(config, k=c.k), mode, exact_mean=handle.exact_mean).model
        return solve_handle(handle, originals, target, config.settings, clusters, rebuild, config.polish_passes)

    try:
        return attempt(None)
    except DmpInfeasible:
        if not (config.exact_mean and config.mean_fallback):
            raise DmpInfeasible(mode, "exact-mean constraint may be infeasible; relax exact_mean") from None
        log.warning("exact-mean DMP infeasible (mode %s); retrying with soft mean", mode)
        return attempt(False)


def _canonical_omit(config: ReductionConfig, term: str) -> ReductionConfig:
    """Config whose omit-``term`` model has the same minimisers, with weights scaled to max 1.

    The omitted term's weight never enters that model's objective, so it is set
    to 1; the other two are divided by their common largest entry.
    """
    keep = {"SM": "w_sm", "COV": "w_cov", "ECDF": "w_ecdf"}
    others = [np.asarray(getattr(config, keep[t]), dtype=float) for t in TERMS if t != term]
    top = max(float(np.max(o)) for o in others)
    scale = 1.0 / top if top > 0 else 1.0
    changes = {keep[t]: np.asarray(getattr(config, keep[t]), dtype=float) * scale
               for t in TERMS if t != term}
    changes[keep[term]] = 1.0
    return replace(config, **changes)


def _cache_key(config: ReductionConfig, mode: str) -> tuple:
    w = tuple(tuple(np.atleast_1d(np.asarray(getattr(config, a), dtype=float)).ravel())
              for a in ("w_sm", "w_cov", "w_ecdf"))
    return (mode, config.norm, config.k, config.p_min, config.p_max, config.exact_mean, w)


def status_quo(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
               config: ReductionConfig, cache: dict | None = None
               ) -> tuple[dict[str, float], dict[str, DmpResult]]:
    """Disagreement point per term: its weighted error when omitted from the objective.

    Each omit-t model is solved with canonically scaled weights and term t's
    error is then re-evaluated with the actual weights, so runs for weight
    sets that differ only in scale share one solve through ``cache``.
    """
    pi_max: dict[str, float] = {}
    runs: dict[str, DmpResult] = {}
    actual = effective_weights(config, target)
    for t in TERMS:
        mode = f"omit-{t}"
        canon = _canonical_omit(config, t)
        key = _cache_key(canon, mode)
        if cache is not None and key in cache:
            res = cache[key]
        else:
            try:
                res = reduce(target, originals, clusters, canon, mode)
            except DmpError as exc:
                raise DmpError(f"status-quo solve {mode} failed: {exc}") from exc
            if cache is not None:
                cache[key] = res
        errs = recompute_errors(target, res.scenarios, res.selection, actual, config.norm)
        runs[t] = replace(res, errors=errs)
        pi_max[t] = errs.pi[t]
    return pi_max, runs
