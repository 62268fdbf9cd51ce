import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_binaries, linprog_value, random_milp, vertex_enumeration
from scengen.model_core import (DegeneratePivotError, Model, ModelError, Sense, SolveSettings, Status, VarKind,
                                encode_sos2, read_mps, solve_lp, solve_milp, write_mps)
from scengen.model_core.branch_bound import relative_gap

NATIVE = SolveSettings(gap=0.0, backend="native")


def random_lp(rng, n, m):
    model = Model("lp")
    for j in range(n):
        model.add_var(f"x{j}", float(rng.integers(-3, 1)), float(rng.integers(1, 5)))
    x0 = np.array([rng.uniform(v.lb, v.ub) for v in model.variables])
    for i in range(m):
        a = np.round(rng.uniform(-4, 4, n), 1)
        act = float(a @ x0)
        if i % 4 == 3:
            model.add_constraint(dict(enumerate(a)), Sense.EQ, act, name=f"r{i}")
        elif i % 2:
            model.add_constraint(dict(enumerate(a)), Sense.GE, act - rng.uniform(0, 2), name=f"r{i}")
        else:
            model.add_constraint(dict(enumerate(a)), Sense.LE, act + rng.uniform(0, 2), name=f"r{i}")
    model.set_objective(dict(enumerate(rng.uniform(-5, 5, n))), maximize=bool(rng.integers(2)))
    return model


# -- solve_lp ----------------------------------------------------------------------
def test_single_variable_bound():
    m = Model()
    x = m.add_var("x", -math.inf, math.inf)
    m.add_constraint({x: 1.0}, ">=", 3.0)
    m.set_objective({x: 1.0})
    sol = solve_lp(m, NATIVE)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-12)
    assert sol.x[x] == pytest.approx(3.0, abs=1e-12)


def test_null_objective_returns_feasible_point():
    m = Model()
    x, y = m.add_var("x"), m.add_var("y")
    m.add_constraint({x: 1.0, y: 1.0}, "==", 1.0)
    m.set_objective({}, maximize=True)
    sol = solve_lp(m, NATIVE)
    assert sol.ok and sol.objective == 0.0
    assert m.max_violation(sol.x) <= 1e-9


def test_lp_matches_vertex_enumeration_on_50_random_lps():
    rng = np.random.default_rng(11)
    for _ in range(50):
        model = random_lp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 9)))
        expected = vertex_enumeration(model)
        sol = solve_lp(model, NATIVE)
        assert expected is not None
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(expected, abs=1e-8, rel=1e-10)


def test_lp_infeasible_and_unbounded():
    m = Model()
    x = m.add_var("x")
    m.add_constraint({x: 1.0}, "<=", -1.0)
    assert solve_lp(m, NATIVE).status is Status.INFEASIBLE
    m = Model()
    x = m.add_var("x")
    m.set_objective({x: 1.0}, maximize=True)
    assert solve_lp(m, NATIVE).status is Status.UNBOUNDED


def test_lp_duality_on_random_standard_form():
    """min c'x, Ax >= b, x >= 0 and its explicit dual max b'u, A'u <= c, u >= 0."""
    rng = np.random.default_rng(5)
    for _ in range(30):
        n, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        A = rng.uniform(0.1, 3, (m, n))
        b = rng.uniform(1, 5, m)
        c = rng.uniform(1, 5, n)
        primal, dual = Model("p"), Model("d")
        xs = [primal.add_var(f"x{j}") for j in range(n)]
        us = [dual.add_var(f"u{i}") for i in range(m)]
        for i in range(m):
            primal.add_constraint(dict(zip(xs, A[i])), ">=", b[i])
        for j in range(n):
            dual.add_constraint(dict(zip(us, A[:, j])), "<=", c[j])
        primal.set_objective(dict(zip(xs, c)))
        dual.set_objective(dict(zip(us, b)), maximize=True)
        p, d = solve_lp(primal, NATIVE), solve_lp(dual, NATIVE)
        assert p.objective == pytest.approx(d.objective, abs=1e-6)
        # returned row duals certify the same value
        assert float(b @ p.duals) == pytest.approx(p.objective, abs=1e-6)


def test_small_infeasibility_next_to_large_coefficients():
    """A 0.1 residual in a unit row stays infeasible even beside rows with 1e8 entries."""
    m = Model()
    x, y = m.add_var("x", 0, 1), m.add_var("y", 0, 1)
    m.add_constraint({x: 1.0, y: 1.0}, ">=", 2.1)
    m.add_constraint({x: 1e8, y: 1e8}, "<=", 3e8)
    assert solve_lp(m, NATIVE).status is Status.INFEASIBLE


def test_degenerate_pivot_error_names_row():
    err = DegeneratePivotError(4, "tiny pivot")
    assert err.row == 4 and "constraint 4" in str(err)


def test_solve_lp_rejects_binaries():
    m = Model()
    m.add_var("b", kind=VarKind.BINARY)
    with pytest.raises(ModelError):
        solve_lp(m)


# -- solve_milp ----------------------------------------------------------------------
def test_tiny_knapsack():
    m = Model()
    y1, y2 = m.add_var("y1", kind="binary"), m.add_var("y2", kind="binary")
    m.add_constraint({y1: 1, y2: 1}, "<=", 1)
    m.set_objective({y1: 1, y2: 1}, maximize=True)
    sol = solve_milp(m, NATIVE)
    assert sol.status is Status.OPTIMAL and sol.objective == pytest.approx(1.0)


@pytest.mark.parametrize("backend", ["native", "highs"])
def test_milp_matches_enumeration(backend):
    rng = np.random.default_rng(2024)
    for _ in range(15):
        model = random_milp(rng, int(rng.integers(1, 8)), int(rng.integers(0, 5)), int(rng.integers(1, 6)))
        sol = solve_milp(model, SolveSettings(gap=0.0, backend=backend))
        assert sol.objective == pytest.approx(enumerate_binaries(model), abs=1e-6)
        assert model.max_violation(sol.x) <= 1e-6


def test_milp_infeasible_root():
    m = Model()
    b = m.add_var("b", kind="binary")
    m.add_constraint({b: 1.0}, ">=", 2.0)
    assert solve_milp(m, NATIVE).status is Status.INFEASIBLE


def test_node_limit_without_incumbent_has_no_values():
    rng = np.random.default_rng(1)
    m = random_milp(rng, 10, 2, 6)
    sol = solve_milp(m, NATIVE.replace(node_limit=1))
    assert sol.status in (Status.NODE_LIMIT, Status.OPTIMAL)
    if sol.status is Status.NODE_LIMIT and sol.x is None:
        assert math.isnan(sol.objective)


def test_relative_gap():
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(0.0, 0.0) == 0.0


def test_settings_validation():
    with pytest.raises(ValueError):
        SolveSettings(gap=-1)
    with pytest.raises(ValueError):
        SolveSettings(time_limit=0)
    s = SolveSettings()
    assert (s.gap, s.time_limit, s.pivot_tol, s.int_tol) == (0.01, 900.0, 1e-9, 1e-6)


# -- encode_sos2 ----------------------------------------------------------------------
def sos_model(size):
    m = Model()
    lam = [m.add_var(f"l{g}", 0, 1) for g in range(size)]
    m.add_constraint({j: 1.0 for j in lam}, "==", 1.0, name="convex")
    encode_sos2(m, lam)
    return m, lam


def fixed_feasible(m, lam, values):
    trial = m.copy()
    for j, v in zip(lam, values):
        trial.set_bounds(j, v, v)
    trial.set_objective({})
    return solve_milp(trial, NATIVE).ok


def test_sos2_group_of_two_adds_one_binary():
    m, lam = sos_model(2)
    assert m.n_binaries == 1


def test_sos2_adjacent_pair_feasible():
    m, lam = sos_model(4)
    assert fixed_feasible(m, lam, (0, 0.4, 0.6, 0))


def test_sos2_non_adjacent_pair_infeasible():
    m, lam = sos_model(3)
    assert not fixed_feasible(m, lam, (0.5, 0, 0.5))


def test_sos2_rejects_small_group_and_overlap():
    m = Model()
    a = m.add_var("a", 0, 1)
    with pytest.raises(ModelError):
        encode_sos2(m, [a])
    b = m.add_var("b", 0, 1)
    encode_sos2(m, [a, b])
    with pytest.raises(ModelError):
        encode_sos2(m, [a, b])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=6), st.integers(0, 4))
def test_sos2_feasible_set_is_adjacent_pairs(weights, start):
    """A point passes the encoding exactly when its support is two adjacent entries."""
    size = len(weights)
    start = min(start, size - 2)
    vals = np.zeros(size)
    w = weights[0] / (1.0 + weights[0]) if weights[0] else 0.5
    vals[start], vals[start + 1] = w, 1 - w
    m, lam = sos_model(size)
    assert fixed_feasible(m, lam, vals)
    if size >= 3:
        bad = np.zeros(size)
        bad[0], bad[-1] = 0.5, 0.5
        assert not fixed_feasible(m, lam, bad)


# -- model invariants and MPS -----------------------------------------------------------
def test_constraint_must_reference_declared_variable():
    m = Model()
    with pytest.raises(ModelError):
        m.add_constraint({0: 1.0}, "<=", 1.0)
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")


def test_empty_model_mps_sections():
    text = write_mps(Model("empty"))
    heads = [ln.split()[0] for ln in text.splitlines() if ln and not ln[0].isspace()]
    assert heads == ["NAME", "ROWS", "COLUMNS", "RHS", "ENDATA"]


def test_single_constraint_transcription():
    m = Model("one")
    x, y = m.add_var("x"), m.add_var("y")
    m.add_constraint({x: 1, y: 2}, "<=", 3, name="c1")
    text = write_mps(m)
    cols = [ln.split() for ln in text.split("\nCOLUMNS\n")[1].split("\nRHS\n")[0].splitlines()]
    assert cols == [["x", "c1", "1"], ["y", "c1", "2"]]
    rhs = [ln.split() for ln in text.split("\nRHS\n")[1].split("\nENDATA")[0].splitlines()]
    assert rhs == [["RHS", "c1", "3"]]


def test_unnamed_variable_rejected():
    m = Model()
    m.add_var("ok")
    m.variables[0].name = ""
    with pytest.raises(ModelError):
        write_mps(m)


def matrices_equal(a: Model, b: Model) -> bool:
    if [v.name for v in a.variables] != [v.name for v in b.variables]:
        return False
    for ra, rb in zip(a.constraints, b.constraints, strict=True):
        if (ra.name, ra.sense, ra.rhs) != (rb.name, rb.sense, rb.rhs):
            return False
        if not (np.array_equal(ra.indices, rb.indices) and np.array_equal(ra.coefs, rb.coefs)):
            return False
    same_bounds = all((va.lb, va.ub, va.kind) == (vb.lb, vb.ub, vb.kind) for va, vb in zip(a.variables, b.variables))
    return same_bounds and a.objective == b.objective and a.maximize == b.maximize


def test_mps_round_trip_is_exact():
    rng = np.random.default_rng(9)
    for _ in range(20):
        m = random_milp(rng, int(rng.integers(0, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        m.constraints[0].coefs = m.constraints[0].coefs * (1 / 3)  # non-terminating binary fractions
        back = read_mps(write_mps(m))
        assert matrices_equal(m, back)


def test_mps_external_solver_agrees(tmp_path):
    from scengen.model_core.highs_backend import solve_mps_file
    rng = np.random.default_rng(4)
    for i in range(5):
        m = random_milp(rng, 5, 3, 4)
        path = tmp_path / f"m{i}.mps"
        path.write_text(write_mps(m))
        ext = solve_mps_file(str(path), SolveSettings(gap=0.0))
        assert ext.objective == pytest.approx(solve_milp(m, NATIVE).objective, abs=1e-6)


def test_returned_solutions_satisfy_constraints():
    rng = np.random.default_rng(77)
    for _ in range(10):
        m = random_milp(rng, 4, 4, 5)
        sol = solve_milp(m, NATIVE)
        assert m.max_violation(sol.x) <= 1e-6
        assert np.all(np.abs(sol.x[:4] - np.round(sol.x[:4])) <= 1e-6)
        assert linprog_value(m) is not None
