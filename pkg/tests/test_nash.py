import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import EXACT_HIGHS, EXACT_NATIVE, consistency_gap, singletons
from scengen.dmp import ReductionConfig, reduce
from scengen.nash import (ParticipationError, PlayerSet, build_grid, build_nash_dmp, evaluate_nash_product,
                          solve_nash)
from scengen.model_core import SolveSettings, Status
from scengen.sampling import kmeans
from scengen.stats import ScenarioSet, summarize


def lam_values(result, term):
    """Solver values of the lambda weights of one player, in grid order."""
    model = result.result.handle.model
    x = result.result.solution.x
    cols = [j for j, v in enumerate(model.variables) if v.name.startswith(f"lam_{term}_")]
    cols.sort(key=lambda j: int(model.variables[j].name.rsplit("_", 1)[1]))
    return x[cols]


@pytest.fixture(scope="module")
def nash_small(small_instance):
    tgt, orig, cl = small_instance
    cfg = ReductionConfig(k=3, w_sm=10.0, w_cov=1.0, w_ecdf=50.0, settings=EXACT_HIGHS)
    return tgt, orig, cl, cfg, solve_nash(tgt, orig, cl, cfg)


# -- grid -----------------------------------------------------------------------------------
def test_grid_example():
    g = build_grid({"SM": 1.0}, size=3, margin=0.1)
    assert np.allclose(g.points["SM"], [0, 0.45, 0.9])
    assert np.allclose(g.coef["SM"], [0, -0.5978, -2.3026], atol=1e-4)
    assert g.coef["SM"][1] == math.log(0.55)


def test_grid_drops_degenerate_player():
    g = build_grid({"SM": 1.0, "COV": 1e-12})
    assert set(g.points) == {"SM"}


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid({"SM": 1.0}, size=1)
    with pytest.raises(ValueError):
        build_grid({"SM": 1.0}, margin=0.0)


def test_one_hot_lambda_hits_grid_point():
    g = build_grid({"SM": 2.0}, size=7)
    for j, p in enumerate(g.points["SM"]):
        lam = np.zeros(7)
        lam[j] = 1.0
        assert lam @ g.points["SM"] == p
        assert g.interpolate("SM", p) == pytest.approx(g.coef["SM"][j], abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1e3), st.integers(2, 60), st.floats(0, 1))
def test_secant_slack_bounded_by_segment_error(pi_max, size, frac):
    g = build_grid({"SM": pi_max}, size=size)
    pi = frac * g.points["SM"][-1]
    slack = g.secant_slack("SM", pi)
    tol = 1e-12 * max(1.0, abs(math.log(pi_max)))
    assert -tol <= slack <= g.max_secant_error("SM") + tol


def test_finer_grid_has_smaller_secant_error():
    errs = [build_grid({"SM": 3.0}, size=s).max_secant_error("SM") for s in (5, 50, 200)]
    assert errs[0] > errs[1] > errs[2] > 0


# -- product --------------------------------------------------------------------------------
def test_nash_product_examples():
    assert evaluate_nash_product({"SM": 0.0}, PlayerSet({"SM": 1.0})) == 1.0
    two = PlayerSet({"SM": 1.0, "ECDF": 1.0})
    assert evaluate_nash_product({"SM": 0.5, "ECDF": 0.5}, two) == pytest.approx(0.25)
    assert evaluate_nash_product({"SM": 0.5, "ECDF": 0.5}, two, log_scale=True) == pytest.approx(2 * math.log(0.5))


def test_nash_product_powers_and_dropped_players():
    p = PlayerSet({"SM": 1.0, "ECDF": 2.0, "COV": 0.0}, {"SM": 2.0})
    assert p.active == ["SM", "ECDF"] and p.dropped == ["COV"]
    assert evaluate_nash_product({"SM": 0.5, "ECDF": 1.0, "COV": 0.0}, p) == pytest.approx(0.25)


def test_participation_violation():
    with pytest.raises(ParticipationError, match="SM"):
        evaluate_nash_product({"SM": 1.5}, PlayerSet({"SM": 1.0}))
    assert evaluate_nash_product({"SM": 1.0}, PlayerSet({"SM": 1.0})) == 0.0


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        PlayerSet({"SM": 1.0}, {"SM": 0.0})


# -- model ----------------------------------------------------------------------------------
@pytest.mark.parametrize("norm", ["L1", "Linf"])
def test_identity_drops_all_players(norm):
    X = np.random.default_rng(9).random((5, 2))
    orig = ScenarioSet.equiprobable(X)
    res = solve_nash(summarize(orig), orig, singletons(orig),
                     ReductionConfig(k=5, norm=norm, settings=EXACT_NATIVE), points=5)
    assert res.players.active == []
    assert np.array_equal(res.scenarios.values, X)
    assert all(v == pytest.approx(0, abs=1e-9) for v in res.errors.pi.values())


def test_single_parameter_drops_cov():
    X = np.random.default_rng(5).normal(size=(10, 1))
    orig = ScenarioSet.equiprobable(X)
    cfg = ReductionConfig(k=3, w_sm=10.0, w_ecdf=50.0, settings=EXACT_NATIVE)
    res = solve_nash(summarize(orig), orig, kmeans(X, 3, seed=0), cfg, points=5)
    assert "COV" in res.players.dropped and set(res.players.active) <= {"SM", "ECDF"}
    assert res.errors.pi["COV"] == 0.0


def test_model_structure(small_instance):
    tgt, orig, cl = small_instance
    players = PlayerSet({"SM": 1.0, "ECDF": 2.0, "COV": 0.0})
    grid = build_grid(players.pi_max, size=6)
    nh = build_nash_dmp(tgt, orig, cl, ReductionConfig(k=3), players, grid)
    m = nh.core.model
    assert m.maximize and set(nh.lam) == {"SM", "ECDF"}
    names = [r.name for r in m.constraints]
    assert "convex_SM" in names and "grid_ECDF" in names and "convex_COV" not in names
    assert m.variables[nh.core.pi["COV"]].ub == 0.0
    for t in nh.lam:
        assert [m.objective[int(j)] for j in nh.lam[t]] == pytest.approx(grid.coef[t].tolist())


def test_participation_and_sos2(nash_small):
    *_, res = nash_small
    assert res.result.solution.status is Status.OPTIMAL
    assert res.players.active
    for t in res.players.active:
        assert res.errors.pi[t] <= (1 - res.grid.margin) * res.players.pi_max[t] + 1e-9
        lam = lam_values(res, t)
        nz = np.flatnonzero(lam > 1e-9)
        assert nz.size <= 2 and (nz.size < 2 or nz[1] - nz[0] == 1)
        assert abs(lam.sum() - 1) <= 1e-9
    assert all(v >= -1e-9 for v in res.participation_margin().values())


def test_piecewise_consistency(nash_small):
    *_, res = nash_small
    h = res.result.handle
    for t in res.players.active:
        assert lam_values(res, t) @ res.grid.points[t] == pytest.approx(res.result.solution.x[h.pi[t]], abs=1e-9)


def test_solver_errors_match_recomputed(nash_small):
    tgt, *_, res = nash_small
    assert consistency_gap(res.result, tgt, res.players) <= 1e-6


def test_linearised_objective_within_secant_bound(nash_small):
    *_, res = nash_small
    lin = res.result.solution.objective
    exact = evaluate_nash_product(res.errors, res.players, log_scale=True, tol=1e-9)
    bound = sum(res.grid.max_secant_error(t) for t in res.players.active)
    assert lin - 1e-7 <= exact <= lin + bound + 1e-7


def test_nash_beats_weighted_sum_up_to_grid_slack(nash_small):
    tgt, orig, cl, cfg, res = nash_small
    milp = reduce(tgt, orig, cl, cfg)
    ln_nash = evaluate_nash_product(res.errors, res.players, log_scale=True, tol=1e-9)
    try:
        ln_milp = evaluate_nash_product(milp.errors, res.players, log_scale=True)
    except ParticipationError:
        ln_milp = -math.inf
    slack = sum(res.grid.max_secant_error(t) for t in res.players.active)
    assert ln_nash >= ln_milp - slack - 1e-9


def test_grid_refinement_moves_errors_by_at_most_spacing(nash_small):
    tgt, orig, cl, cfg, coarse = nash_small
    fine = solve_nash(tgt, orig, cl, cfg, points=200, pi_max=coarse.players.pi_max)
    for t in coarse.players.active:
        assert abs(coarse.errors.pi[t] - fine.errors.pi[t]) <= coarse.grid.spacing(t) + 1e-9


def test_report_schema(nash_small):
    *_, res = nash_small
    rep = res.report()
    for key in ("pi_max", "pi", "active_players", "dropped_players", "nash_product", "participation_margin", "grid"):
        assert key in rep
    assert rep["grid"]["points"] == 50


def test_gap_limited_linf_solution_has_tight_errors(medium_instance):
    # a 1% gap incumbent may leave the epigraph errors slack; polishing re-solves with y fixed
    tgt, orig, cl = medium_instance
    cfg = ReductionConfig(k=5, norm="Linf", w_sm=10.0, w_cov=1.0, w_ecdf=50.0, settings=SolveSettings(backend="highs"))
    res = solve_nash(tgt, orig, cl, cfg)
    assert consistency_gap(res.result, tgt, res.players) <= 1e-6
