"""Nash-bargaining variant of the DMP.

The three error terms act as players whose disagreement point is the error
they suffer when left out of the weighted-sum objective.  The log of the Nash
product is separable and concave; each ln(pi_max - pi) is replaced by its
piecewise-linear interpolant on a uniform grid with SOS2 weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dmp import (TERMS, DmpError, DmpInfeasible, DmpModelHandle, DmpResult, ReductionConfig,
                  build_core, solve_handle, status_quo)
from .model_core import Sense, encode_sos2
from .sampling.kmeans import ClusterAssignment
from .stats import ErrorReport, ScenarioSet, StatSummary

log = logging.getLogger(__name__)

DROP_THRESHOLD = 1e-9
DEFAULT_POINTS = 50
DEFAULT_MARGIN = 1e-3


class ParticipationError(ValueError):
    """A player's error exceeds its disagreement point."""


@dataclass
class PlayerSet:
    pi_max: dict[str, float]
    alpha: dict[str, float] = field(default_factory=dict)
    threshold: float = DROP_THRESHOLD

    def __post_init__(self):
        for t in self.pi_max:
            self.alpha.setdefault(t, 1.0)
        if any(a <= 0 for a in self.alpha.values()):
            raise ValueError("negotiation powers must be positive")

    @property
    def active(self) -> list[str]:
        return [t for t in TERMS if t in self.pi_max and self.pi_max[t] >= self.threshold]

    @property
    def dropped(self) -> list[str]:
        return [t for t in TERMS if t in self.pi_max and self.pi_max[t] < self.threshold]


@dataclass
class NashGrid:
    points: dict[str, np.ndarray]
    coef: dict[str, np.ndarray]
    pi_max: dict[str, float]
    size: int
    margin: float

    def spacing(self, t: str) -> float:
        return float(self.points[t][1] - self.points[t][0])

    def interpolate(self, t: str, pi: float) -> float:
        """Value of the piecewise-linear log surrogate at ``pi``."""
        return float(np.interp(pi, self.points[t], self.coef[t]))

    def secant_slack(self, t: str, pi: float) -> float:
        """ln(pi_max - pi) minus its chord approximation; nonnegative by concavity."""
        return math.log(self.pi_max[t] - pi) - self.interpolate(t, pi)

    def max_secant_error(self, t: str) -> float:
        """Largest chord error over all segments of player ``t``'s grid."""
        M = self.pi_max[t]
        g, c = self.points[t], self.coef[t]
        worst = 0.0
        for a, b, fa, fb in zip(g[:-1], g[1:], c[:-1], c[1:]):
            s = (fb - fa) / (b - a)
            x = min(max(M + 1.0 / s, a), b)  # tangent point where f'(x) equals the chord slope
            worst = max(worst, math.log(M - x) - (fa + s * (x - a)))
        return worst

    def to_json(self) -> dict:
        return {"points": self.size, "margin": self.margin,
                "spacing": {t: self.spacing(t) for t in self.points},
                "max_secant_error": {t: self.max_secant_error(t) for t in self.points}}


def build_grid(pi_max: dict[str, float], size: int = DEFAULT_POINTS, margin: float = DEFAULT_MARGIN,
               threshold: float = DROP_THRESHOLD) -> NashGrid:
    """Uniform grid on [0, (1 - margin) pi_max] for every player above ``threshold``."""
    if size < 2:
        raise ValueError("grid needs at least 2 points")
    if not 0 < margin < 1:
        raise ValueError("safety margin must lie in (0, 1)")
    points, coef = {}, {}
    for t, M in pi_max.items():
        if M < threshold:
            continue
        g = np.linspace(0.0, (1.0 - margin) * M, size)
        c = np.log(M - g)
        if not np.all(np.diff(c) < 0):
            raise ValueError(f"grid for {t} is not strictly decreasing in log gain")
        points[t], coef[t] = g, c
    return NashGrid(points, coef, {t: pi_max[t] for t in points}, size, margin)


@dataclass
class NashHandle:
    core: DmpModelHandle
    players: PlayerSet
    grid: NashGrid
    lam: dict[str, np.ndarray]


def build_nash_dmp(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
                   config: ReductionConfig, players: PlayerSet, grid: NashGrid,
                   exact_mean: bool | None = None, relax_sos2: bool = False) -> NashHandle:
    """DMP constraints plus the SOS2 log-linearised Nash objective (maximised).

    ``relax_sos2`` skips the adjacency binaries.  Because every log term is
    concave and maximised, the plain convex combination then already sits on
    the interpolant, so this is only safe for this objective.
    """
    handle = build_core(target, originals, clusters, config, exact_mean, name="nash")
    handle.mode = "nash"
    model = handle.model
    lam: dict[str, np.ndarray] = {}
    obj: dict[int, float] = {}
    for t in players.active:
        if t not in grid.points:
            raise DmpError(f"no grid for active player {t}")
        g = grid.points[t]
        lam[t] = np.array([model.add_var(f"lam_{t}_{j}", 0, 1) for j in range(g.size)], dtype=np.int64)
        model.add_row(lam[t], np.ones(g.size), Sense.EQ, 1.0, f"convex_{t}")
        model.add_row(np.concatenate([[handle.pi[t]], lam[t]]), np.concatenate([[1.0], -g]),
                      Sense.EQ, 0.0, f"grid_{t}")
        if not relax_sos2:
            encode_sos2(model, list(lam[t]), prefix=f"sos_{t}")
        for j, c in zip(lam[t], grid.coef[t]):
            obj[int(j)] = players.alpha[t] * float(c)
    for t in players.dropped:
        model.set_bounds(handle.pi[t], ub=max(players.pi_max[t], 0.0))
    if not players.active:
        log.info("all players degenerate; solving the zero-error feasibility model")
    model.set_objective(obj, maximize=True)
    return NashHandle(handle, players, grid, lam)


def evaluate_nash_product(errors: ErrorReport | dict[str, float], players: PlayerSet,
                          log_scale: bool = False, tol: float = 0.0) -> float:
    """Exact Nash product over the active players (or its logarithm)."""
    pi = errors.pi if isinstance(errors, ErrorReport) else errors
    total = 0.0
    for t in players.active:
        gain = players.pi_max[t] - pi[t]
        if gain < -tol:
            raise ParticipationError(f"player {t}: error {pi[t]:.6g} exceeds status quo {players.pi_max[t]:.6g}")
        if gain <= 0:
            return -math.inf if log_scale else 0.0
        total += players.alpha[t] * math.log(gain)
    return total if log_scale else math.exp(total)


@dataclass
class NashResult:
    result: DmpResult
    players: PlayerSet
    grid: NashGrid
    status_quo_runs: dict[str, DmpResult]

    @property
    def scenarios(self) -> ScenarioSet:
        return self.result.scenarios

    @property
    def errors(self) -> ErrorReport:
        return self.result.errors

    def participation_margin(self) -> dict[str, float]:
        """(1 - margin) pi_max - pi per active player; nonnegative when participation holds."""
        return {t: (1 - self.grid.margin) * self.players.pi_max[t] - self.errors.pi[t]
                for t in self.players.active}

    def report(self) -> dict:
        rep = self.result.report()
        rep.update({
            "pi_max": dict(self.players.pi_max),
            "pi": dict(self.errors.pi),
            "active_players": self.players.active,
            "dropped_players": self.players.dropped,
            "alpha": dict(self.players.alpha),
            "nash_product": evaluate_nash_product(self.errors, self.players, tol=1e-9),
            "participation_margin": self.participation_margin(),
            "grid": self.grid.to_json(),
        })
        return rep


def solve_nash(target: StatSummary, originals: ScenarioSet, clusters: ClusterAssignment,
               config: ReductionConfig, points: int = DEFAULT_POINTS, margin: float = DEFAULT_MARGIN,
               alpha: dict[str, float] | None = None,
               pi_max: dict[str, float] | None = None, cache: dict | None = None) -> NashResult:
    """Status quo (unless supplied), grid, NASH model, solve and extraction."""
    runs: dict[str, DmpResult] = {}
    if pi_max is None:
        pi_max, runs = status_quo(target, originals, clusters, config, cache)
    players = PlayerSet(dict(pi_max), dict(alpha or {}))
    grid = build_grid(players.pi_max, points, margin)

    def attempt(exact):
        nh = build_nash_dmp(target, originals, clusters, config, players, grid, exact_mean=exact)

        def rebuild(t, o, c):
            return build_nash_dmp(t, o, c, replace(config, k=c.k), players, grid,
                                  exact_mean=nh.core.exact_mean, relax_sos2=True).core.model
        return solve_handle(nh.core, originals, target, config.settings, clusters, rebuild,
                            config.polish_passes)

    try:
        res = attempt(None)
    except DmpInfeasible:
        hint = "no zero-error set exists" if not players.active else "relax exact_mean"
        if not (config.exact_mean and config.mean_fallback):
            raise DmpInfeasible("nash", hint) from None
        log.warning("exact-mean NASH model infeasible; retrying with soft mean")
        try:
            res = attempt(False)
        except DmpInfeasible:
            raise DmpInfeasible("nash", hint if not players.active else "") from None
    return NashResult(res, players, grid, runs)
