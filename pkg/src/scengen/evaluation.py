"""Capacity-planning two-stage stochastic program and tree-quality measures.

Eleven candidate processes turn five raw materials into five products.  The
process selection ``y`` and capacities ``Q`` are decided before uncertainty
in yields (``PC``) and demands (``D``) is revealed; all flows are recourse.
Demand equalities get a shortage slack priced at a multiple of the product
price so every fixed design has a feasible recourse.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .model_core import Model, Sense, Solution, SolveSettings, VarKind, solve_lp, solve_milp
from .stats import ScenarioSet

log = logging.getLogger(__name__)

N_PROC, N_PROD, N_RAW, N_FLOW = 11, 5, 5, 5
UNCERTAIN_CANDIDATES = ("PC4", "PC7", "PC8", "PC11", "D2", "D3", "D4", "D5")
INSTANCES = {
    1: {"uncertain": ("PC7", "PC8"), "n": 1000, "k": 10},
    2: {"uncertain": ("PC4", "PC7", "PC8", "PC11"), "n": 2000, "k": 20},
    3: {"uncertain": ("PC4", "PC7", "PC8", "PC11", "D2", "D3", "D4", "D5"), "n": 2000, "k": 40},
}


class MappingError(ValueError):
    """A scenario column does not name an uncertain parameter of the instance."""


class RecourseError(RuntimeError):
    """A second-stage problem failed even though shortage slack is present."""


@dataclass
class CapacityData:
    DC: np.ndarray
    FC: np.ndarray
    maxQ: np.ndarray
    MI: np.ndarray
    OC: np.ndarray
    PC: np.ndarray
    D: np.ndarray
    beta: np.ndarray
    maxRM: np.ndarray
    alpha: np.ndarray
    uncertain: tuple[str, ...] = ()
    shortage_factor: float = 10.0
    shortage_cap: float | None = None

    def __post_init__(self):
        for name in ("DC", "FC", "maxQ", "MI", "OC", "PC", "D", "beta", "maxRM", "alpha"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr <= 0):
                raise ValueError(f"{name} must be positive")
            setattr(self, name, arr)
        bad = [u for u in self.uncertain if u not in UNCERTAIN_CANDIDATES]
        if bad:
            raise MappingError(f"parameters {bad} cannot be uncertain; choose from {UNCERTAIN_CANDIDATES}")

    @classmethod
    def table(cls, instance: int | None = None, **kw) -> "CapacityData":
        """Case-study values; ``instance`` selects the uncertain parameters (1, 2 or 3)."""
        data = cls(
            DC=np.full(N_PROC, 2500.0),
            FC=np.array([4000, 2500, 3500, 3000, 4500, 2500, 3000, 2200, 2800, 2700, 2500], dtype=float),
            maxQ=np.full(N_PROC, 3.0),
            MI=np.array([18, 20, 15, 20, 20, 21, 15, 15, 25, 15, 20], dtype=float),
            OC=np.full(N_PROC, 400.0),
            PC=np.array([13, 15, 17, 14, 10, 15, 16, 11, 13, 15, 17], dtype=float),
            D=np.array([30.80, 29.60, 30.05, 29.50, 30.00]),
            beta=np.array([600, 650, 500, 400, 700], dtype=float),
            maxRM=np.array([34.80, 35.65, 33.65, 35.50, 35.00]),
            alpha=np.array([200, 320, 230, 250, 300], dtype=float),
            uncertain=INSTANCES[instance]["uncertain"] if instance else (),
        )
        return replace(data, **kw) if kw else data

    def nominal(self, name: str) -> float:
        if name.startswith("PC"):
            return float(self.PC[int(name[2:]) - 1])
        return float(self.D[int(name[1:]) - 1])

    def scenario_params(self, names: list[str], row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(PC, D) with the uncertain entries replaced by ``row``."""
        pc, d = self.PC.copy(), self.D.copy()
        for name, v in zip(names, row):
            if name not in self.uncertain:
                raise MappingError(f"scenario parameter {name!r} is not uncertain in this instance "
                                   f"({', '.join(self.uncertain) or 'none'})")
            if name.startswith("PC"):
                pc[int(name[2:]) - 1] = v
            else:
                d[int(name[1:]) - 1] = v
        return pc, d


@dataclass
class FirstStage:
    y: np.ndarray
    Q: np.ndarray

    def cost(self, data: CapacityData) -> float:
        return float(data.DC @ self.Q + data.FC @ self.y)

    def to_json(self) -> dict:
        return {"y": [int(v) for v in self.y], "Q": [float(v) for v in self.Q]}


@dataclass
class TsspHandle:
    model: Model
    y: np.ndarray
    Q: np.ndarray
    shortage: np.ndarray  # (K, 5) column indices


def _add_recourse(model: Model, tag: str, prob: float, pc: np.ndarray, d: np.ndarray, data: CapacityData,
                  Q: np.ndarray | None, obj: dict) -> tuple[np.ndarray, dict]:
    """One scenario's flows and balances; returns the shortage columns and the key row ids."""
    def var(name, ub=math.inf):
        return model.add_var(f"{name}_{tag}", 0.0, ub)

    IS = [var(f"IS{j + 1}") for j in range(N_PROC)]
    OS = [var(f"OS{j + 1}") for j in range(N_PROC)]
    RM = [var(f"RM{h + 1}", float(data.maxRM[h])) for h in range(N_RAW)]
    P = [var(f"P{l + 1}") for l in range(N_PROD)]
    f = [var(f"f{i + 1}") for i in range(N_FLOW)]
    cap = math.inf if data.shortage_cap is None else data.shortage_cap
    S = [var(f"short{l + 1}", cap) for l in range(N_PROD)]
    rows = {"yield": [], "demand": [], "cap": [], "IS": IS}
    for j in range(N_PROC):
        rows["yield"].append(model.add_row(np.array([OS[j], IS[j]]), np.array([1.0, -float(pc[j])]),
                                           Sense.EQ, 0.0, f"yield{j + 1}_{tag}"))
    for l in range(N_PROD):
        rows["demand"].append(model.add_row(np.array([P[l], S[l]]), np.ones(2), Sense.EQ, float(d[l]),
                                            f"demand{l + 1}_{tag}"))
    for j in range(N_PROC):
        if Q is None:
            rows["cap"].append(model.add_row(np.array([IS[j]]), np.ones(1), Sense.LE, 0.0, f"cap{j + 1}_{tag}"))
        else:
            rows["cap"].append(model.add_row(np.array([IS[j], Q[j]]), np.array([1.0, -float(data.MI[j])]),
                                             Sense.LE, 0.0, f"cap{j + 1}_{tag}"))

    def bal(name, plus, minus):
        idx = np.array(plus + minus)
        model.add_row(idx, np.concatenate([np.ones(len(plus)), -np.ones(len(minus))]), Sense.EQ, 0.0,
                      f"{name}_{tag}")

    bal("rm1", [RM[0]], [IS[0], IS[1], IS[2]])
    bal("rm2", [RM[1]], [IS[4], IS[5]])
    bal("is4", [RM[2], OS[0], OS[1], OS[2], f[1]], [IS[3]])
    bal("is7", [f[2], f[3]], [IS[6]])
    bal("rm5", [RM[4]], [IS[8], IS[9]])
    bal("f1", [OS[0], f[4]], [f[0]])
    bal("os10", [OS[9]], [f[4], P[0]])
    bal("f1split", [f[0]], [f[1], IS[10]])
    bal("os4", [OS[3]], [f[2], P[2]])
    bal("p2", [P[1]], [OS[10]])
    bal("p4", [P[3]], [OS[6]])
    bal("p5", [P[4]], [OS[7]])

    for l in range(N_PROD):
        obj[P[l]] = obj.get(P[l], 0.0) + prob * data.beta[l]
        obj[S[l]] = obj.get(S[l], 0.0) - prob * data.shortage_factor * data.beta[l]
    for h in range(N_RAW):
        obj[RM[h]] = obj.get(RM[h], 0.0) - prob * data.alpha[h]
    for j in range(N_PROC):
        obj[IS[j]] = obj.get(IS[j], 0.0) - prob * data.OC[j]
    return np.array(S), rows


def build_capacity_tssp(scenarios: ScenarioSet, data: CapacityData) -> TsspHandle:
    """Deterministic equivalent over all scenarios (profit maximisation)."""
    names = list(scenarios.names)
    model = Model("capacity_tssp")
    y = np.array([model.add_var(f"y{j + 1}", 0, 1, VarKind.BINARY) for j in range(N_PROC)])
    Q = np.array([model.add_var(f"Q{j + 1}", 0, math.inf) for j in range(N_PROC)])
    obj: dict[int, float] = {}
    for j in range(N_PROC):
        model.add_row(np.array([Q[j], y[j]]), np.array([1.0, -float(data.maxQ[j])]), Sense.LE, 0.0, f"maxq{j + 1}")
        obj[int(y[j])] = -float(data.FC[j])
        obj[int(Q[j])] = -float(data.DC[j])
    shortage = []
    for k in range(scenarios.n_scenarios):
        pc, d = data.scenario_params(names, scenarios.values[k])
        S, _ = _add_recourse(model, f"s{k}", float(scenarios.probs[k]), pc, d, data, Q, obj)
        shortage.append(S)
    model.set_objective(obj, maximize=True)
    return TsspHandle(model, y, Q, np.array(shortage).reshape(-1, N_PROD))


@dataclass
class StageResult:
    first: FirstStage
    objective: float
    solution: Solution
    shortage: np.ndarray

    @property
    def shortage_active(self) -> bool:
        return bool(np.any(self.shortage > 1e-9))


def solve_first_stage(scenarios: ScenarioSet, data: CapacityData, settings: SolveSettings) -> StageResult:
    """Here-and-now decisions of the scenario tree and its in-sample objective."""
    h = build_capacity_tssp(scenarios, data)
    sol = solve_milp(h.model, settings)
    if sol.x is None:
        return StageResult(FirstStage(np.zeros(N_PROC, dtype=int), np.zeros(N_PROC)), math.nan, sol,
                           np.zeros((scenarios.n_scenarios, N_PROD)))
    y = np.round(sol.x[h.y]).astype(int)
    Q = np.clip(sol.x[h.Q], 0.0, None)
    short = sol.x[h.shortage]
    if np.any(short > 1e-9):
        log.warning("demand shortage active in %d of %d scenarios", int(np.any(short > 1e-9, axis=1).sum()),
                    scenarios.n_scenarios)
    return StageResult(FirstStage(y, Q), float(sol.objective), sol, short)


@dataclass
class OutOfSample:
    expected: float
    first_stage_cost: float
    recourse: np.ndarray
    shortage: np.ndarray

    @property
    def shortage_scenarios(self) -> int:
        return int(np.any(self.shortage > 1e-9, axis=1).sum())


def evaluate_out_of_sample(first: FirstStage, reference: ScenarioSet, data: CapacityData,
                           settings: SolveSettings | None = None) -> OutOfSample:
    """First-stage cost plus the probability-weighted optimal recourse on every reference scenario."""
    settings = settings or SolveSettings()
    names = list(reference.names)
    model = Model("recourse")
    obj: dict[int, float] = {}
    pc0, d0 = data.scenario_params([], [])
    S, rows = _add_recourse(model, "r", 1.0, pc0, d0, data, None, obj)
    model.set_objective(obj, maximize=True)
    for j, r in enumerate(rows["cap"]):
        model.constraints[r].rhs = float(data.MI[j] * first.Q[j])
    values = np.empty(reference.n_scenarios)
    shortage = np.empty((reference.n_scenarios, N_PROD))
    for k in range(reference.n_scenarios):
        pc, d = data.scenario_params(names, reference.values[k])
        for j, r in enumerate(rows["yield"]):
            con = model.constraints[r]
            con.coefs = np.where(con.indices == rows["IS"][j], -float(pc[j]), 1.0)
        for l, r in enumerate(rows["demand"]):
            model.constraints[r].rhs = float(d[l])
        sol = solve_lp(model, settings)
        if not sol.ok:
            raise RecourseError(f"recourse problem for reference scenario {k} ended {sol.status.value}")
        values[k] = sol.objective
        shortage[k] = sol.x[S]
    fc = first.cost(data)
    return OutOfSample(float(-fc + reference.probs @ values), fc, values, shortage)


def bias(out_of_sample: float, z_star: float) -> tuple[float, float]:
    """Signed bias f(x; R) - z* and its magnitude as a percentage of |z*|."""
    b = out_of_sample - z_star
    return b, 100.0 * abs(b) / abs(z_star) if z_star else math.inf


def synthetic_history(data: CapacityData, n_obs: int, seed: int, cv_pc: float = 0.10, cv_d: float = 0.03,
                      correlation: float = 0.5, skewness: float = 0.5, kurtosis: float = 3.5) -> ScenarioSet:
    """Correlated, mildly skewed observations around the nominal values of the uncertain parameters."""
    from .sampling import fit_pearson, sample_original
    names = list(data.uncertain)
    if not names:
        raise MappingError("instance has no uncertain parameters")
    margs = []
    for name in names:
        mu = data.nominal(name)
        sd = (cv_pc if name.startswith("PC") else cv_d) * mu
        margs.append(fit_pearson(mu, sd * sd, skewness, kurtosis))
    m = len(names)
    corr = np.full((m, m), correlation) + (1 - correlation) * np.eye(m)
    return sample_original(margs, corr, n_obs, seed, names)


def weight_grid(values=(1, 10, 50, 100)) -> list[tuple[float, float, float]]:
    """Distinct (SM, COV, ECDF) triples over ``values`` up to a common positive factor.

    Each class is represented by its member with the smallest maximum entry;
    the list is sorted for a stable order.
    """
    seen: dict[tuple, tuple] = {}
    for t in itertools.product(values, repeat=3):
        low = min(t)
        key = tuple(Fraction(v) / Fraction(low) for v in t)
        if key not in seen or max(t) < max(seen[key]):
            seen[key] = t
    return sorted((float(a), float(b), float(c)) for a, b, c in seen.values())
