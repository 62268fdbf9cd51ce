"""End-to-end scenario generation: statistics, marginals, copula sampling,
clustering, reduction (weighted-sum or Nash) and the stability experiment.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dmp import DmpError, DmpResult, ReductionConfig, diagnose, reduce
from .evaluation import (INSTANCES, CapacityData, FirstStage, bias, evaluate_out_of_sample,
                         solve_first_stage, synthetic_history, weight_grid)
from .model_core import SolveSettings, write_mps
from .nash import NashResult, evaluate_nash_product, solve_nash
from .sampling import ClusterAssignment, MarginalModel, empirical_marginal, fit_pearson, kmeans, sample_original
from .stats import NORMS, ScenarioSet, StatSummary, summarize

log = logging.getLogger(__name__)

METHODS = ("MILP", "NASH")
ENV_PREFIX = "SCENGEN_"


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


class InputError(ValueError):
    """Unreadable or inconsistent input data."""


@dataclass
class SolverConfig:
    gap: float = 0.01
    time_limit: float = 900.0
    node_limit: int = 1
    int_tol: float = 1e-6
    pivot_tol: float = 1e-9
    backend: str = "highs"

    def settings(self) -> SolveSettings:
        return SolveSettings(gap=self.gap, time_limit=self.time_limit, node_limit=self.node_limit,
                             int_tol=self.int_tol, pivot_tol=self.pivot_tol, backend=self.backend)


@dataclass
class HistoryConfig:
    n_obs: int = 200
    cv_pc: float = 0.10
    cv_d: float = 0.03
    correlation: float = 0.5
    skewness: float = 0.5
    kurtosis: float = 3.5


@dataclass
class TsspConfig:
    gap: float = 1e-6
    shortage_factor: float = 10.0
    shortage_cap: float | None = None


@dataclass
class PipelineConfig:
    input: str | None = None
    instance: int = 1
    seed: int = 0
    n: int | None = None
    k: int | None = None
    marginal: str = "pearson"
    reference: str = "original"
    reference_n: int | None = None
    method: str = "NASH"
    norm: str = "L1"
    methods: list = field(default_factory=lambda: list(METHODS))
    norms: list = field(default_factory=lambda: list(NORMS))
    weights: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    weight_sets: list | None = None
    p_min: float = 1e-3
    p_max: float = 1.0
    exact_mean: bool = True
    mean_fallback: bool = True
    grid_points: int = 50
    grid_margin: float = 1e-3
    alpha: dict = field(default_factory=lambda: {"SM": 1.0, "ECDF": 1.0, "COV": 1.0})
    polish_passes: int = 2
    export_mps: bool = False
    jobs: int = 1
    out: str = "out"
    solver: SolverConfig = field(default_factory=SolverConfig)
    history: HistoryConfig = field(default_factory=HistoryConfig)
    tssp: TsspConfig = field(default_factory=TsspConfig)

    _NESTED = {"solver": SolverConfig, "history": HistoryConfig, "tssp": TsspConfig}

    # -- construction --------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kw = {}
        for key, value in doc.items():
            if key in cls._NESTED:
                sub = cls._NESTED[key]
                if not isinstance(value, dict):
                    raise ConfigError(f"{key} must be an object")
                bad = sorted(set(value) - {f.name for f in fields(sub)})
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {', '.join(bad)}")
                value = sub(**value)
            kw[key] = value
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None,
             overrides: dict | None = None) -> "PipelineConfig":
        """Read a JSON file, then apply ``SCENGEN_*`` variables, then explicit overrides."""
        doc: dict = {}
        if path is not None:
            try:
                doc = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError(f"configuration file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"configuration is not valid JSON: {exc}") from None
            if not isinstance(doc, dict):
                raise ConfigError("configuration must be a JSON object")
        env = os.environ if env is None else env
        for name, raw in sorted(env.items()):
            if not name.startswith(ENV_PREFIX):
                continue
            parts = name[len(ENV_PREFIX):].lower().split("__")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            target = doc
            for p in parts[:-1]:
                target = target.setdefault(p, {})
                if not isinstance(target, dict):
                    raise ConfigError(f"{name}: {p} is not an object")
            target[parts[-1]] = value
        for key, value in (overrides or {}).items():
            if value is not None:
                doc[key] = value
        return cls.from_dict(doc)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.instance in INSTANCES, f"instance must be one of {sorted(INSTANCES)}")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed must be a 64-bit nonnegative integer")
        need(self.n is None or (isinstance(self.n, int) and self.n >= 1), "n must be a positive integer")
        need(self.k is None or (isinstance(self.k, int) and self.k >= 1), "k must be a positive integer")
        need(self.n_scenarios >= self.k_scenarios, f"k={self.k_scenarios} exceeds n={self.n_scenarios}")
        need(self.marginal in ("pearson", "empirical"), "marginal must be 'pearson' or 'empirical'")
        need(self.reference in ("original", "independent"), "reference must be 'original' or 'independent'")
        need(self.method in METHODS, f"method must be one of {METHODS}")
        need(self.norm in NORMS, f"norm must be one of {NORMS}")
        need(bool(self.methods) and all(m in METHODS for m in self.methods), f"methods must be a subset of {METHODS}")
        need(bool(self.norms) and all(m in NORMS for m in self.norms), f"norms must be a subset of {NORMS}")
        for w in [self.weights] + list(self.weight_sets or []):
            need(isinstance(w, (list, tuple)) and len(w) == 3 and all(isinstance(v, (int, float)) and v >= 0 for v in w),
                 f"weight triple {w!r} must be three nonnegative numbers (SM, COV, ECDF)")
        need(self.weight_sets is None or len(self.weight_sets) > 0, "weight_sets must not be empty")
        need(0 <= self.p_min <= self.p_max <= 1, "need 0 <= p_min <= p_max <= 1")
        need(self.k_scenarios * self.p_min <= 1 <= self.k_scenarios * self.p_max + 1e-12,
             "probability bounds incompatible with k")
        need(isinstance(self.grid_points, int) and self.grid_points >= 2, "grid_points must be >= 2")
        need(0 < self.grid_margin < 1, "grid_margin must lie in (0, 1)")
        need(set(self.alpha) <= {"SM", "ECDF", "COV"} and all(v > 0 for v in self.alpha.values()),
             "alpha keys must be SM/ECDF/COV with positive values")
        need(isinstance(self.jobs, int) and self.jobs >= 1, "jobs must be >= 1")
        need(isinstance(self.polish_passes, int) and self.polish_passes >= 0, "polish_passes must be >= 0")
        try:
            self.solver.settings()
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from None
        need(self.tssp.gap >= 0 and self.tssp.shortage_factor > 0, "tssp gap must be >= 0 and shortage_factor > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    # -- derived ---------------------------------------------------------------
    @property
    def n_scenarios(self) -> int:
        return self.n if self.n is not None else INSTANCES[self.instance]["n"]

    @property
    def k_scenarios(self) -> int:
        return self.k if self.k is not None else INSTANCES[self.instance]["k"]

    def all_weight_sets(self) -> list[tuple[float, float, float]]:
        if self.weight_sets is None:
            return weight_grid()
        return [tuple(float(v) for v in w) for w in self.weight_sets]

    def reduction(self, weights, norm: str) -> ReductionConfig:
        w = [float(v) for v in weights]
        return ReductionConfig(k=self.k_scenarios, norm=norm, w_sm=w[0], w_cov=w[1], w_ecdf=w[2],
                               p_min=self.p_min, p_max=self.p_max, exact_mean=self.exact_mean,
                               mean_fallback=self.mean_fallback, polish_passes=self.polish_passes,
                               settings=self.solver.settings())

    def capacity_data(self, names: list[str] | None = None) -> CapacityData:
        data = CapacityData.table(self.instance, shortage_factor=self.tssp.shortage_factor,
                                  shortage_cap=self.tssp.shortage_cap)
        if names is not None and tuple(names) != data.uncertain:
            data = replace(data, uncertain=tuple(names))
        return data

    def tssp_settings(self) -> SolveSettings:
        return self.solver.settings().replace(gap=self.tssp.gap, node_limit=1_000_000)


# -- data ingestion --------------------------------------------------------------
def read_history(path: str | Path) -> ScenarioSet:
    """Observations CSV: header of parameter names, one numeric row per observation."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_history(text)


def parse_history(text: str) -> ScenarioSet:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError("empty data file")
    names = [c.strip() for c in rows[0]]
    if any(not c for c in names) or len(set(names)) != len(names):
        raise InputError("header must hold distinct, non-empty parameter names")
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(names):
            raise InputError(f"row {lineno}: expected {len(names)} fields, found {len(r)}")
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise InputError(f"row {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"row {lineno}: non-finite value")
        data.append(vals)
    if len(data) < 2:
        raise InputError(f"need at least 2 observations, found {len(data)}")
    return ScenarioSet.equiprobable(np.array(data), names)


def load_history(cfg: PipelineConfig) -> ScenarioSet:
    if cfg.input:
        return read_history(cfg.input)
    h = cfg.history
    data = CapacityData.table(cfg.instance)
    return synthetic_history(data, h.n_obs, cfg.seed, h.cv_pc, h.cv_d, h.correlation, h.skewness, h.kurtosis)


def correlation_of(summary: StatSummary) -> np.ndarray:
    C = np.array(summary.covariance, dtype=float)
    C = np.triu(C) + np.triu(C, 1).T
    np.fill_diagonal(C, summary.moments[:, 1])
    sd = np.sqrt(np.diag(C))
    if np.any(sd == 0):
        raise InputError("a parameter has zero variance; correlation undefined")
    R = C / np.outer(sd, sd)
    np.fill_diagonal(R, 1.0)
    return R


def fit_marginals(cfg: PipelineConfig, history: ScenarioSet, summary: StatSummary) -> list[MarginalModel]:
    if cfg.marginal == "empirical":
        return [empirical_marginal(history.values[:, i]) for i in range(history.n_params)]
    out = []
    for i in range(summary.moments.shape[0]):
        m = summary.moments[i]
        out.append(fit_pearson(m[0], m[1], float(summary.skewness[i]), float(summary.kurtosis[i])))
    return out


@dataclass
class Generated:
    history: ScenarioSet
    summary: StatSummary
    marginals: list[MarginalModel]
    correlation: np.ndarray
    originals: ScenarioSet


def generate(cfg: PipelineConfig, history: ScenarioSet | None = None) -> Generated:
    history = history if history is not None else load_history(cfg)
    summary = summarize(history)
    margs = fit_marginals(cfg, history, summary)
    corr = correlation_of(summary) if history.n_params > 1 else np.ones((1, 1))
    originals = sample_original(margs, corr, cfg.n_scenarios, cfg.seed, history.names)
    return Generated(history, summary, margs, corr, originals)


def reference_set(cfg: PipelineConfig, gen: Generated) -> ScenarioSet:
    if cfg.reference == "original":
        return gen.originals
    n = cfg.reference_n or cfg.n_scenarios
    return sample_original(gen.marginals, gen.correlation, n, cfg.seed + 1, gen.history.names)


def cluster(cfg: PipelineConfig, originals: ScenarioSet) -> ClusterAssignment:
    return kmeans(originals.values, cfg.k_scenarios, seed=cfg.seed)


# -- reduction -----------------------------------------------------------------
@dataclass
class MethodRun:
    method: str
    norm: str
    weights: tuple
    scenarios: ScenarioSet
    selection: np.ndarray
    report: dict
    models: dict = field(default_factory=dict, repr=False)


def run_method(cfg: PipelineConfig, method: str, norm: str, weights, target: StatSummary,
               originals: ScenarioSet, clusters: ClusterAssignment, cache: dict | None = None,
               keep_models: bool = False) -> MethodRun:
    rc = cfg.reduction(weights, norm)
    t0 = time.perf_counter()
    models = {}
    if method == "MILP":
        res: DmpResult = reduce(target, originals, clusters, rc)
        rep = res.report()
        scen, sel = res.scenarios, res.selection
        if keep_models:
            models["dmp"] = res.handle.model
    else:
        nr: NashResult = solve_nash(target, originals, clusters, rc, cfg.grid_points, cfg.grid_margin,
                                    dict(cfg.alpha), cache=cache)
        rep = nr.report()
        scen, sel = nr.scenarios, nr.result.selection
        rep["status_quo"] = {t: r.report() for t, r in nr.status_quo_runs.items()}
        if keep_models:
            models["nash"] = nr.result.handle.model
            for t, r in nr.status_quo_runs.items():
                models[f"statusquo_omit-{t}"] = r.handle.model
    diag = diagnose(scen, rc.k, rc.p_min)
    rep.update({"method": method, "weights": list(map(float, weights)), "diagnostics": diag.to_json()})
    log.info("%s-%s %s: %.1fs", method, norm, list(weights), time.perf_counter() - t0)
    return MethodRun(method, norm, tuple(weights), scen, sel, rep, models)


# -- experiment --------------------------------------------------------------------
@dataclass
class Shared:
    cfg: PipelineConfig
    target: StatSummary
    originals: ScenarioSet
    clusters: ClusterAssignment
    reference: ScenarioSet
    data: CapacityData
    z_star: float
    out: str | None = None


def _cell(shared: Shared, index: int, weights, norm: str, cache: dict) -> list[dict]:
    cfg = shared.cfg
    rows = []
    for method in cfg.methods:
        row = {"set": index, "w_sm": weights[0], "w_cov": weights[1], "w_ecdf": weights[2],
               "method": method, "norm": norm}
        try:
            run = run_method(cfg, method, norm, weights, shared.target, shared.originals, shared.clusters,
                             cache, keep_models=cfg.export_mps)
            st = solve_first_stage(run.scenarios, shared.data, cfg.tssp_settings())
            if not st.solution.ok:
                raise DmpError(f"first-stage solve ended {st.solution.status.value}")
            oos = evaluate_out_of_sample(st.first, shared.reference, shared.data, cfg.tssp_settings())
            b, pct = bias(oos.expected, shared.z_star)
            rep = run.report
            diag = rep["diagnostics"]
            row.update({
                "status": rep["status"], "gap": rep["gap"], "nodes": rep["nodes"],
                "in_sample": st.objective, "out_of_sample": oos.expected, "bias": b, "bias_pct": pct,
                "pi_SM": rep["errors"]["errors"]["SM"], "pi_COV": rep["errors"]["errors"]["COV"],
                "pi_ECDF": rep["errors"]["errors"]["ECDF"],
                "n_scenarios": diag["n_scenarios"], "duplicates": len(diag["duplicate_pairs"]),
                "low_probability": len(diag["low_probability"]), "min_probability": float(run.scenarios.probs.min()),
                "clean": diag["clean"], "shortage_scenarios": oos.shortage_scenarios,
                "selection": " ".join(str(int(s)) for s in run.selection),
            })
            if method == "NASH":
                row.update({f"pi_max_{t}": v for t, v in rep["pi_max"].items()})
                row["nash_product"] = rep["nash_product"]
                row["dropped"] = " ".join(rep["dropped_players"])
            row["first_stage"] = st.first.to_json()
            row["report"] = rep
            if shared.out and cfg.export_mps:
                tag = f"set{index:02d}_{method}_{norm}"
                for name, model in run.models.items():
                    Path(shared.out, f"{tag}_{name}.mps").write_text(write_mps(model))
                from .evaluation import build_capacity_tssp
                Path(shared.out, f"{tag}_tssp.mps").write_text(
                    write_mps(build_capacity_tssp(run.scenarios, shared.data).model))
        except Exception as exc:  # a failed cell is recorded and the sweep continues
            log.error("cell %d %s-%s failed: %s", index, method, norm, exc)
            row.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
        rows.append(row)
    return rows


def _cell_group(args) -> list[dict]:
    shared, items = args
    cache: dict = {}
    out = []
    for index, weights, norm in items:
        out.extend(_cell(shared, index, weights, norm, cache))
    return out


CSV_COLUMNS = ["set", "w_sm", "w_cov", "w_ecdf", "method", "norm", "status", "gap", "nodes", "in_sample",
               "out_of_sample", "bias", "bias_pct", "pi_SM", "pi_COV", "pi_ECDF", "pi_max_SM", "pi_max_COV",
               "pi_max_ECDF", "nash_product", "dropped", "n_scenarios", "duplicates", "low_probability",
               "min_probability", "clean", "shortage_scenarios", "selection", "error"]


def _quartiles(v: np.ndarray) -> dict:
    if v.size == 0:
        return {"q1": None, "median": None, "q3": None, "iqr": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3), "iqr": float(q3 - q1)}


@dataclass
class StabilityReport:
    rows: list[dict]
    z_star: float
    z_star_first_stage: dict
    config: dict
    weight_sets: list

    def series(self, method: str, norm: str, column: str) -> np.ndarray:
        return np.array([r[column] for r in self.rows
                         if r["method"] == method and r["norm"] == norm and r.get("status") != "failed"],
                        dtype=float)

    def aggregates(self) -> dict:
        agg = {}
        groups = sorted({(r["method"], r["norm"]) for r in self.rows})
        for method, norm in groups:
            pct = self.series(method, norm, "bias_pct")
            total = sum(1 for r in self.rows if r["method"] == method and r["norm"] == norm)
            agg[f"{method}-{norm}"] = {
                "runs": total,
                "failed": total - pct.size,
                "bias_pct": {"min": float(pct.min()) if pct.size else None,
                             "mean": float(pct.mean()) if pct.size else None,
                             "max": float(pct.max()) if pct.size else None},
                "in_sample": _quartiles(self.series(method, norm, "in_sample")),
                "out_of_sample": _quartiles(self.series(method, norm, "out_of_sample")),
            }
        return agg

    def to_json(self) -> dict:
        return {"z_star": self.z_star, "z_star_first_stage": self.z_star_first_stage,
                "weight_sets": [list(w) for w in self.weight_sets], "aggregates": self.aggregates(),
                "runs": [{k: v for k, v in r.items()} for r in self.rows], "config": self.config}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r.get(c, "")) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def full_space(cfg: PipelineConfig, reference: ScenarioSet, data: CapacityData):
    st = solve_first_stage(reference, data, cfg.tssp_settings())
    if not st.solution.ok:
        raise DmpError(f"full-space solve ended {st.solution.status.value}")
    return st


def run_weight_experiment(cfg: PipelineConfig, weight_sets=None, out: str | None = None,
                          jobs: int | None = None) -> StabilityReport:
    """Sample and cluster once, then reduce / solve / evaluate every (weight set, norm, method)."""
    weight_sets = [tuple(float(v) for v in w) for w in (weight_sets or cfg.all_weight_sets())]
    if not weight_sets:
        raise ConfigError("weight-set list is empty")
    gen = generate(cfg)
    ref = reference_set(cfg, gen)
    data = cfg.capacity_data(list(gen.history.names))
    target = summarize(gen.originals)
    clusters = cluster(cfg, gen.originals)
    t0 = time.perf_counter()
    fs = full_space(cfg, ref, data)
    log.info("full-space objective %.6f (%.1fs)", fs.objective, time.perf_counter() - t0)
    shared = Shared(cfg, target, gen.originals, clusters, ref, data, fs.objective, out)
    items = [(i, w, norm) for norm in cfg.norms for i, w in enumerate(weight_sets)]
    jobs = jobs or cfg.jobs
    # cells of one norm share a status-quo cache, so keep them on the same worker
    groups = [[it for it in items if it[2] == norm] for norm in cfg.norms]
    if jobs > 1:
        chunks = []
        for g in groups:
            size = max(1, math.ceil(len(g) / max(1, jobs // len(groups))))
            chunks.extend(g[s:s + size] for s in range(0, len(g), size))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_cell_group, [(shared, c) for c in chunks]))
    else:
        parts = [_cell_group((shared, g)) for g in groups]
    rows = [r for part in parts for r in part]
    order = {m: i for i, m in enumerate(cfg.methods)}
    norder = {n: i for i, n in enumerate(cfg.norms)}
    rows.sort(key=lambda r: (r["set"], norder[r["norm"]], order[r["method"]]))
    log.info("sweep finished in %.1fs", time.perf_counter() - t0)
    return StabilityReport(rows, fs.objective, fs.first.to_json(), cfg.to_dict(), weight_sets)


def evaluate_tree(cfg: PipelineConfig, tree: ScenarioSet, reference: ScenarioSet) -> dict:
    """In-sample, out-of-sample and bias of one scenario tree against a reference set."""
    data = cfg.capacity_data(list(reference.names))
    fs = full_space(cfg, reference, data)
    st = solve_first_stage(tree, data, cfg.tssp_settings())
    if not st.solution.ok:
        raise DmpError(f"first-stage solve ended {st.solution.status.value}")
    oos = evaluate_out_of_sample(st.first, reference, data, cfg.tssp_settings())
    b, pct = bias(oos.expected, fs.objective)
    return {"in_sample": st.objective, "out_of_sample": oos.expected, "z_star": fs.objective,
            "bias": b, "bias_pct": pct, "first_stage": st.first.to_json(),
            "shortage_scenarios_in_sample": int(np.any(st.shortage > 1e-9, axis=1).sum()),
            "shortage_scenarios_out_of_sample": oos.shortage_scenarios}


def dumps(doc) -> str:
    """Deterministic JSON: NaN/inf become null, numpy scalars become Python numbers."""
    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.ndarray):
            return clean(v.tolist())
        if isinstance(v, (np.floating, float)):
            v = float(v)
            return v if math.isfinite(v) else None
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v
    return json.dumps(clean(doc), indent=2) + "\n"


__all__ = ["PipelineConfig", "ConfigError", "InputError", "read_history", "parse_history", "load_history",
           "generate", "reference_set", "cluster", "run_method", "run_weight_experiment", "StabilityReport",
           "evaluate_tree", "dumps", "FirstStage"]
