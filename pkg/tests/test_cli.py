import csv
import json

import numpy as np
import pytest

from scengen import pipeline as pl
from scengen.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main
from scengen.model_core import SolveSettings, read_mps, solve_milp
from scengen.stats import ScenarioSet

SMALL = {"n": 60, "k": 4, "seed": 7, "weights": [10, 1, 50], "weight_sets": [[1, 1, 1], [10, 1, 50]],
         "methods": ["MILP"], "norms": ["L1"], "history": {"n_obs": 80}}


def write_config(tmp_path, **changes):
    doc = {**SMALL, **changes}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# -- configuration ----------------------------------------------------------------------------
def test_defaults_follow_instance():
    cfg = pl.PipelineConfig.load(env={})
    assert cfg.n_scenarios == 1000 and cfg.k_scenarios == 10 and len(cfg.all_weight_sets()) == 55


def test_unknown_keys_rejected():
    with pytest.raises(pl.ConfigError, match="bogus"):
        pl.PipelineConfig.from_dict({"bogus": 1})
    with pytest.raises(pl.ConfigError, match="solver: .*speed"):
        pl.PipelineConfig.from_dict({"solver": {"speed": 1}})


def test_env_override_and_precedence(tmp_path):
    path = write_config(tmp_path)
    env = {"SCENGEN_SEED": "11", "SCENGEN_SOLVER__GAP": "0.05", "OTHER": "x"}
    cfg = pl.PipelineConfig.load(path, env=env)
    assert cfg.seed == 11 and cfg.solver.gap == 0.05 and cfg.n == 60
    cfg = pl.PipelineConfig.load(path, env=env, overrides={"seed": 3, "out": None})
    assert cfg.seed == 3 and cfg.out == "out"


@pytest.mark.parametrize("doc,msg", [({"k": 70, "n": 60}, "exceeds"), ({"norm": "L2"}, "norm"),
                                     ({"weights": [1, 2]}, "weight triple"), ({"grid_margin": 1.5}, "grid_margin"),
                                     ({"solver": {"backend": "cplex"}}, "backend")])
def test_invalid_values(doc, msg):
    with pytest.raises(pl.ConfigError, match=msg):
        pl.PipelineConfig.from_dict(doc)


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("analyze", "--config", bad) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    assert run("analyze", "--config", tmp_path / "missing.json") == EXIT_CONFIG


# -- analyze ----------------------------------------------------------------------------------
def test_analyze_mean(tmp_path):
    data = tmp_path / "obs.csv"
    data.write_text("x\n1\n2\n3\n4\n")
    assert run("analyze", "--input", data, "--out", tmp_path / "o") == EXIT_OK
    doc = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert doc["names"] == ["x"] and doc["moments"][0][0] == 2.5


@pytest.mark.parametrize("text,msg", [("a,b\n1,2\n3\n", "row 3"), ("a,b\n1,2\n3,x\n", "row 3: non-numeric"),
                                      ("a,a\n1,2\n3,4\n", "distinct"), ("a\n1\n", "at least 2")])
def test_malformed_input(tmp_path, capsys, text, msg):
    data = tmp_path / "obs.csv"
    data.write_text(text)
    assert run("analyze", "--input", data, "--out", tmp_path / "o") == EXIT_INPUT
    assert msg in capsys.readouterr().err


def test_missing_originals_is_input_error(tmp_path):
    assert run("reduce", "--config", write_config(tmp_path), "--out", tmp_path / "empty") == EXIT_INPUT


# -- full pipeline ----------------------------------------------------------------------------
def pipeline_run(tmp_path, out, method="MILP"):
    cfg = write_config(tmp_path)
    assert run("generate", "--config", cfg, "--out", out) == EXIT_OK
    assert run("reduce", "--config", cfg, "--out", out, "--method", method) == EXIT_OK
    assert run("evaluate", "--config", cfg, "--out", out, "--method", method) == EXIT_OK


def test_generate_reduce_evaluate(tmp_path):
    out = tmp_path / "a"
    pipeline_run(tmp_path, out)
    for name in ("history.csv", "originals.csv", "marginals.json", "reduced_MILP_L1.csv", "clusters.csv",
                 "errors_MILP_L1.json", "diagnostics_MILP_L1.json", "report_MILP_L1.json", "ecdf_MILP_L1.svg",
                 "evaluation_MILP_L1.json"):
        assert (out / name).exists(), name
    red = ScenarioSet.load(out / "reduced_MILP_L1.csv")
    assert red.n_scenarios == 4 and abs(red.probs.sum() - 1) <= 1e-9
    orig = ScenarioSet.load(out / "originals.csv")
    assert orig.n_scenarios == 60 and orig.names == ["PC7", "PC8"]
    diag = json.loads((out / "diagnostics_MILP_L1.json").read_text())
    assert diag["n_scenarios"] == 4 and diag["distinct_values"] == [4, 4] and diag["low_probability"] == [] and diag["clean"]
    ev = json.loads((out / "evaluation_MILP_L1.json").read_text())
    assert ev["bias"] <= 1e-6 * abs(ev["z_star"])


def test_nash_and_milp_share_clusters(tmp_path):
    out = tmp_path / "b"
    pipeline_run(tmp_path, out, "MILP")
    clusters = (out / "clusters.csv").read_bytes()
    assert run("reduce", "--config", write_config(tmp_path), "--out", out, "--method", "NASH") == EXIT_OK
    assert (out / "clusters.csv").read_bytes() == clusters
    rep = json.loads((out / "report_NASH_L1.json").read_text())
    assert "pi_max" in rep and "participation_margin" in rep and "status_quo" in rep
    assert (out / "report_MILP_L1.json").exists()


def test_pipeline_is_byte_deterministic(tmp_path):
    pipeline_run(tmp_path, tmp_path / "r1")
    pipeline_run(tmp_path, tmp_path / "r2")
    a, b = tree_bytes(tmp_path / "r1"), tree_bytes(tmp_path / "r2")
    assert a.keys() == b.keys() and all(a[k] == b[k] for k in a)


def test_experiment_rows_match_weight_sets(tmp_path, capsys):
    out = tmp_path / "exp"
    assert run("experiment", "--config", write_config(tmp_path), "--out", out) == EXIT_OK
    rows = list(csv.DictReader((out / "stability.csv").open()))
    assert len(rows) == 2 and {r["method"] for r in rows} == {"MILP"}
    assert [(r["w_sm"], r["w_ecdf"]) for r in rows] == [("1.0", "1.0"), ("10.0", "50.0")]
    doc = json.loads((out / "stability.json").read_text())
    assert set(doc["aggregates"]) == {"MILP-L1"}
    assert (out / "stability_boxplot.svg").exists()
    assert "MILP-L1: mean |bias|" in capsys.readouterr().out


def test_export_mps_models_are_solvable(tmp_path):
    out = tmp_path / "m"
    cfg = write_config(tmp_path)
    assert run("generate", "--config", cfg, "--out", out) == EXIT_OK
    for method in ("MILP", "NASH"):
        assert run("export-mps", "--config", cfg, "--out", out, "--method", method) == EXIT_OK
        model = read_mps((out / f"{method}_L1.mps").read_text())
        assert solve_milp(model, SolveSettings(backend="highs")).ok
    tssp = read_mps((out / "tssp_nominal.mps").read_text())
    assert tssp.maximize and np.isfinite(solve_milp(tssp, SolveSettings(backend="highs", gap=0.0)).objective)


def test_failed_cell_is_recorded_and_sweep_continues(monkeypatch):
    from scengen.dmp import DmpError
    cfg = pl.PipelineConfig.from_dict(SMALL)
    original = pl.run_method

    def flaky(cfg, method, norm, weights, *args, **kw):
        if weights[0] == 10:
            raise DmpError("forced failure")
        return original(cfg, method, norm, weights, *args, **kw)

    monkeypatch.setattr(pl, "run_method", flaky)
    rep = pl.run_weight_experiment(cfg)
    assert [r["status"] == "failed" for r in rep.rows] == [False, True]
    assert "forced failure" in rep.rows[1]["error"]
    assert rep.aggregates()["MILP-L1"]["failed"] == 1
