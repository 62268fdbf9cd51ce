"""Command-line entry point: ``scengen <subcommand> [options]``.

Exit codes: 0 success, 1 solver failure, 2 input error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .dmp import DmpError
from .evaluation import MappingError, RecourseError, build_capacity_tssp
from .model_core import ModelError, SolverError, write_mps
from .sampling import CorrelationError, MomentRegionError
from .stats import ScenarioError, ScenarioSet, summarize

log = logging.getLogger("scengen")

EXIT_OK, EXIT_SOLVER, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed (overrides the configuration)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for the experiment sweep")
    common.add_argument("--method", choices=pl.METHODS, help="reduction method")
    common.add_argument("--norm", choices=("L1", "Linf"), help="error norm")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="scengen", description="Moment/distribution matching scenario generation "
                                "and reduction with a Nash-bargaining variant.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", parents=[common], help="moments, covariance and ECDF of observations")
    a.add_argument("--input", help="observations CSV (header of parameter names)")
    g = sub.add_parser("generate", parents=[common], help="sample the original scenario set")
    g.add_argument("--input", help="observations CSV; synthetic case-study data when omitted")
    r = sub.add_parser("reduce", parents=[common], help="cluster and reduce an original set")
    r.add_argument("--originals", help="original scenario CSV (default <out>/originals.csv)")
    e = sub.add_parser("evaluate", parents=[common], help="stability and bias of a reduced tree")
    e.add_argument("--tree", help="reduced scenario CSV (default <out>/reduced_<method>_<norm>.csv)")
    e.add_argument("--reference", help="reference scenario CSV (default <out>/originals.csv)")
    sub.add_parser("experiment", parents=[common], help="weight-set sweep with box plots")
    x = sub.add_parser("export-mps", parents=[common], help="write reduction and case-study models as MPS")
    x.add_argument("--originals", help="original scenario CSV (default <out>/originals.csv)")
    return p


def _config(args) -> pl.PipelineConfig:
    over = {"seed": args.seed, "out": args.out, "jobs": args.jobs, "method": args.method, "norm": args.norm}
    if getattr(args, "input", None):
        over["input"] = args.input
    return pl.PipelineConfig.load(args.config, overrides=over)


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _load_set(path: Path) -> ScenarioSet:
    if not path.exists():
        raise pl.InputError(f"scenario file not found: {path}")
    return ScenarioSet.load(path)


def cmd_analyze(cfg, args, out: Path) -> None:
    if not cfg.input:
        raise pl.InputError("analyze needs --input or an 'input' configuration entry")
    hist = pl.read_history(cfg.input)
    summary = summarize(hist)
    _write(out / "summary.json", pl.dumps(summary.to_json()))


def cmd_generate(cfg, args, out: Path) -> None:
    gen = pl.generate(cfg)
    if not cfg.input:
        _write(out / "history.csv", _history_csv(gen.history))
    gen.originals.save(out / "originals.csv")
    doc = {"seed": cfg.seed, "n": cfg.n_scenarios, "names": list(gen.history.names),
           "marginals": [m.to_json() for m in gen.marginals], "correlation": gen.correlation,
           "target": gen.summary.to_json()}
    _write(out / "marginals.json", pl.dumps(doc))


def _history_csv(h: ScenarioSet) -> str:
    lines = [",".join(h.names)] + [",".join(repr(float(v)) for v in row) for row in h.values]
    return "\n".join(lines) + "\n"


def cmd_reduce(cfg, args, out: Path) -> None:
    originals = _load_set(Path(args.originals) if args.originals else out / "originals.csv")
    target = summarize(originals)
    clusters = pl.cluster(cfg, originals)
    run = pl.run_method(cfg, cfg.method, cfg.norm, cfg.weights, target, originals, clusters,
                        keep_models=cfg.export_mps)
    tag = f"{cfg.method}_{cfg.norm}"
    run.scenarios.save(out / f"reduced_{tag}.csv")
    _write(out / "clusters.csv", "scenario,cluster\n" + "".join(f"{n},{int(c)}\n" for n, c in
                                                             enumerate(clusters.labels)))
    _write(out / f"errors_{tag}.json", pl.dumps(run.report["errors"]))
    _write(out / f"diagnostics_{tag}.json", pl.dumps(run.report["diagnostics"]))
    _write(out / f"report_{tag}.json", pl.dumps(run.report))
    from .plotting import ecdf_overlay
    ecdf_overlay(originals, run.scenarios, out / f"ecdf_{tag}.svg")
    for name, model in run.models.items():
        _write(out / f"{tag}_{name}.mps", write_mps(model))


def cmd_evaluate(cfg, args, out: Path) -> None:
    tag = f"{cfg.method}_{cfg.norm}"
    tree = _load_set(Path(args.tree) if args.tree else out / f"reduced_{tag}.csv")
    ref = _load_set(Path(args.reference) if args.reference else out / "originals.csv")
    if list(tree.names) != list(ref.names):
        raise pl.InputError("tree and reference sets have different parameters")
    _write(out / f"evaluation_{tag}.json", pl.dumps(pl.evaluate_tree(cfg, tree, ref)))


def cmd_experiment(cfg, args, out: Path) -> None:
    rep = pl.run_weight_experiment(cfg, out=str(out))
    _write(out / "stability.json", pl.dumps(rep.to_json()))
    _write(out / "stability.csv", rep.to_csv())
    from .plotting import stability_boxplots
    stability_boxplots(rep, out / "stability_boxplot.svg")
    for name, agg in rep.aggregates().items():
        b = agg["bias_pct"]
        if b["mean"] is not None:
            print(f"{name}: mean |bias| {b['mean']:.4f}%  max {b['max']:.4f}%  "
                  f"out-of-sample IQR {agg['out_of_sample']['iqr']:.4f}")


def cmd_export_mps(cfg, args, out: Path) -> None:
    originals = _load_set(Path(args.originals) if args.originals else out / "originals.csv")
    target = summarize(originals)
    clusters = pl.cluster(cfg, originals)
    tag = f"{cfg.method}_{cfg.norm}"
    rc = cfg.reduction(cfg.weights, cfg.norm)
    if cfg.method == "MILP":
        from .dmp import build_dmp
        _write(out / f"{tag}.mps", write_mps(build_dmp(target, originals, clusters, rc).model))
    else:
        from .dmp import status_quo
        from .nash import PlayerSet, build_grid, build_nash_dmp
        pi_max, _ = status_quo(target, originals, clusters, rc)
        players = PlayerSet(pi_max, dict(cfg.alpha))
        grid = build_grid(pi_max, cfg.grid_points, cfg.grid_margin)
        _write(out / f"{tag}.mps", write_mps(build_nash_dmp(target, originals, clusters, rc, players, grid).core.model))
    data = cfg.capacity_data(list(originals.names))
    nominal = ScenarioSet(np.array([[data.nominal(n) for n in originals.names]]), np.ones(1), list(originals.names))
    _write(out / "tssp_nominal.mps", write_mps(build_capacity_tssp(nominal, data).model))


COMMANDS = {"analyze": cmd_analyze, "generate": cmd_generate, "reduce": cmd_reduce, "evaluate": cmd_evaluate,
            "experiment": cmd_experiment, "export-mps": cmd_export_mps}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
    except pl.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args, out)
    except pl.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pl.InputError, ScenarioError, MappingError, MomentRegionError, CorrelationError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DmpError, SolverError, RecourseError, ModelError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
