"""Moments, covariance, ECDF, post-hoc matching errors and the transport distance."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .model_core import Model, Sense, SolveSettings, solve_lp

PROB_COLUMN = "probability"
NORMS = ("L1", "Linf")


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioSet:
    """``values[n, i]``: parameter ``i`` in scenario ``n``; ``probs[n]`` sums to one."""

    values: np.ndarray
    probs: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise ScenarioError("values must be a 2-D array (scenarios x parameters)")
        self.probs = np.asarray(self.probs, dtype=float).ravel()
        n, k = self.values.shape
        if n < 1 or k < 1:
            raise ScenarioError("a scenario set needs at least one scenario and one parameter")
        if self.probs.size != n:
            raise ScenarioError(f"{self.probs.size} probabilities for {n} scenarios")
        if np.any(self.probs < 0):
            raise ScenarioError("negative probability")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ScenarioError(f"probabilities sum to {self.probs.sum():.12g}, not 1")
        if not self.names:
            self.names = [f"x{i + 1}" for i in range(k)]
        if len(self.names) != k:
            raise ScenarioError("one name per parameter required")

    @classmethod
    def equiprobable(cls, values, names: Sequence[str] | None = None) -> "ScenarioSet":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        n = values.shape[0]
        return cls(values, np.full(n, 1.0 / n), list(names or []))

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[0]

    @property
    def n_params(self) -> int:
        return self.values.shape[1]

    # -- CSV ----------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.names, PROB_COLUMN])
        for row, p in zip(self.values.tolist(), self.probs.tolist()):
            w.writerow([repr(v) for v in row] + [repr(p)])
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ScenarioSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ScenarioError("empty scenario file")
        header = [h.strip() for h in rows[0]]
        if PROB_COLUMN not in header:
            raise ScenarioError(f"missing {PROB_COLUMN!r} column")
        pcol = header.index(PROB_COLUMN)
        names = [h for k, h in enumerate(header) if k != pcol]
        vals, probs = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                nums = [float(v) for v in row]
            except ValueError:
                raise ScenarioError(f"row {lineno}: non-numeric entry") from None
            if len(nums) != len(header):
                raise ScenarioError(f"row {lineno}: expected {len(header)} fields, got {len(nums)}")
            probs.append(nums[pcol])
            vals.append([v for k, v in enumerate(nums) if k != pcol])
        return cls(np.array(vals), np.array(probs), names)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSet":
        return cls.from_csv(Path(path).read_text())


@dataclass
class StatSummary:
    """Matching targets: ``moments[i] = (mean, m2, m3, m4)`` (central, denormalised)."""

    moments: np.ndarray
    covariance: np.ndarray
    ecdf: np.ndarray
    n_samples: int
    names: list[str]
    skewness: np.ndarray
    kurtosis: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.moments[:, 0]

    @property
    def degenerate(self) -> list[str]:
        """Parameters with zero variance (normalised skew/kurtosis undefined)."""
        return [n for n, s in zip(self.names, self.skewness) if not np.isfinite(s)]

    def to_json(self) -> dict:
        def opt(a):
            return [None if not np.isfinite(v) else float(v) for v in a]
        return {
            "names": list(self.names),
            "n_samples": int(self.n_samples),
            "moments": self.moments.tolist(),
            "covariance": self.covariance.tolist(),
            "ecdf": self.ecdf.tolist(),
            "skewness": opt(self.skewness),
            "kurtosis": opt(self.kurtosis),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "StatSummary":
        nan = float("nan")
        return cls(
            moments=np.array(doc["moments"], dtype=float),
            covariance=np.array(doc["covariance"], dtype=float),
            ecdf=np.array(doc["ecdf"], dtype=float),
            n_samples=int(doc["n_samples"]),
            names=list(doc["names"]),
            skewness=np.array([nan if v is None else v for v in doc["skewness"]], dtype=float),
            kurtosis=np.array([nan if v is None else v for v in doc["kurtosis"]], dtype=float),
        )

    def with_moments_from(self, other: "StatSummary") -> "StatSummary":
        """Keep this ECDF but match another source's moments and covariance."""
        return StatSummary(other.moments.copy(), other.covariance.copy(), self.ecdf, self.n_samples,
                           self.names, other.skewness.copy(), other.kurtosis.copy())


def weighted_ecdf(values: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """``F[n, i] = sum of p[n'] over X[n', i] <= X[n, i]`` (ties take the full tied mass)."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    for i in range(values.shape[1]):
        col = values[:, i]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        cum = np.cumsum(probs[order])
        # last position of each value's tie block
        last = np.searchsorted(sorted_vals, col, side="right") - 1
        out[:, i] = cum[last]
    return np.minimum(out, 1.0)


def summarize(scen: ScenarioSet) -> StatSummary:
    X, p = scen.values, scen.probs
    mean = p @ X
    dev = X - mean
    moments = np.empty((scen.n_params, 4))
    moments[:, 0] = mean
    for m in (2, 3, 4):
        moments[:, m - 1] = p @ dev**m
    cov = (dev * p[:, None]).T @ dev
    cov = 0.5 * (cov + cov.T)
    var = moments[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(var > 0, moments[:, 2] / var**1.5, np.nan)
        kurt = np.where(var > 0, moments[:, 3] / var**2, np.nan)
    return StatSummary(moments, cov, weighted_ecdf(X, p), scen.n_scenarios, list(scen.names),
                       skew, kurt)


@dataclass
class ErrorReport:
    """Post-hoc matching errors of a reduced set against a target summary.

    ``d_plus/d_minus[i, m]`` satisfy ``value + d_plus - d_minus = target``;
    ``c_plus/c_minus`` are full ``I x I`` arrays populated on ``i < i'``.
    ``phi`` holds the ECDF deviation at each kept scenario.
    """

    pi: dict[str, float]
    d_plus: np.ndarray
    d_minus: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    e: np.ndarray
    phi: np.ndarray
    norm: str

    @property
    def moment_abs(self) -> np.ndarray:
        return self.d_plus + self.d_minus

    def to_json(self) -> dict:
        iu = np.triu_indices(self.c_plus.shape[0], 1)
        return {
            "norm": self.norm,
            "errors": {k: float(v) for k, v in self.pi.items()},
            "moment_deviation": (self.d_minus - self.d_plus).tolist(),
            "covariance_deviation": [float(v) for v in (self.c_minus - self.c_plus)[iu]],
            "ecdf_max": self.e.tolist(),
            "ecdf_deviation": self.phi.tolist(),
        }


@dataclass
class Weights:
    """Effective error weights (already divided by the target magnitudes)."""

    sm: np.ndarray        # (I, 4)
    cov: np.ndarray       # (I, I), upper triangle used
    ecdf: np.ndarray      # (I,)
    flags: list[str] = field(default_factory=list)


def _split(diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positive / negative parts of ``target - value``."""
    return np.maximum(diff, 0.0), np.maximum(-diff, 0.0)


def recompute_errors(target: StatSummary, reduced: ScenarioSet, selection: Sequence[int],
                     weights: Weights, norm: str = "L1") -> ErrorReport:
    """Re-evaluate every matching deviation of ``reduced`` independently of any solver.

    ``selection[k]`` is the original index of kept scenario ``k``; ECDF targets
    are read at those indices from ``target.ecdf``.
    """
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}")
    sel = np.asarray(selection, dtype=int)
    if sel.size != reduced.n_scenarios:
        raise ScenarioError("selection map length differs from reduced set size")
    if sel.size and (sel.min() < 0 or sel.max() >= target.ecdf.shape[0]):
        raise ScenarioError(f"selection references unknown original index (valid 0..{target.ecdf.shape[0] - 1})")
    X, p = reduced.values, reduced.probs
    D = target.moments
    n_par = X.shape[1]
    vals = np.empty((n_par, 4))
    vals[:, 0] = p @ X
    dev = X - D[:, 0]
    for m in (2, 3, 4):
        vals[:, m - 1] = p @ dev**m
    d_plus, d_minus = _split(D - vals)
    cov_vals = (dev * p[:, None]).T @ dev
    c_plus = np.zeros((n_par, n_par))
    c_minus = np.zeros((n_par, n_par))
    iu = np.triu_indices(n_par, 1)
    cp, cm = _split(target.covariance[iu] - cov_vals[iu])
    c_plus[iu], c_minus[iu] = cp, cm
    red_cdf = weighted_ecdf(X, p)
    phi = target.ecdf[sel, :] - red_cdf
    e = np.abs(phi).max(axis=0) if sel.size else np.zeros(n_par)

    sm_terms = weights.sm * (d_plus + d_minus)
    cov_terms = (weights.cov * (c_plus + c_minus))[iu]
    ecdf_terms = weights.ecdf * e
    agg = np.sum if norm == "L1" else (lambda a: np.max(a, initial=0.0))
    pi = {"SM": float(agg(sm_terms)), "COV": float(agg(cov_terms)), "ECDF": float(agg(ecdf_terms))}
    return ErrorReport(pi, d_plus, d_minus, c_plus, c_minus, e, phi, norm)


def wasserstein(a: ScenarioSet, b: ScenarioSet, settings: SolveSettings | None = None) -> float:
    """Optimal transport cost with squared Euclidean ground cost, as an LP."""
    if a.n_params != b.n_params:
        raise ScenarioError("scenario sets live in different parameter spaces")
    for s in (a, b):
        if abs(s.probs.sum() - 1.0) > 1e-9:
            raise ScenarioError("invalid distribution: probabilities do not sum to 1")
    if np.array_equal(a.values, b.values) and np.array_equal(a.probs, b.probs):
        # the identity coupling costs nothing and every cost is >= 0
        return 0.0
    diff = a.values[:, None, :] - b.values[None, :, :]
    cost = np.einsum("nkd,nkd->nk", diff, diff)
    model = Model("transport")
    na, nb = cost.shape
    eta = np.array([[model.add_var(f"eta_{n}_{k}") for k in range(nb)] for n in range(na)])
    for n in range(na):
        model.add_constraint({int(j): 1.0 for j in eta[n]}, Sense.EQ, float(a.probs[n]), name=f"src_{n}")
    for k in range(nb):
        model.add_constraint({int(j): 1.0 for j in eta[:, k]}, Sense.EQ, float(b.probs[k]), name=f"dst_{k}")
    model.set_objective({int(eta[n, k]): float(cost[n, k]) for n in range(na) for k in range(nb)})
    sol = solve_lp(model, settings or SolveSettings())
    if not sol.ok:
        raise RuntimeError(f"transport LP failed: {sol.status.value}")
    return max(float(sol.objective), 0.0)
