import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scengen.dmp import solver_errors  # noqa: E402
from scengen.model_core import SolveSettings  # noqa: E402
from scengen.sampling import kmeans  # noqa: E402
from scengen.stats import ScenarioSet, recompute_errors, summarize  # noqa: E402

EXACT_NATIVE = SolveSettings(gap=0.0, backend="native")
EXACT_HIGHS = SolveSettings(gap=0.0, backend="highs")


def bivariate(n: int, k: int, seed: int = 3, rho: float = 0.6):
    """Correlated two-parameter original set, its target summary and a K-clustering."""
    rng = np.random.default_rng(seed)
    X = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], n) + [5.0, 3.0]
    orig = ScenarioSet.equiprobable(X, ["a", "b"])
    return summarize(orig), orig, kmeans(X, k, seed=1)


def singletons(orig: ScenarioSet):
    from scengen.sampling import ClusterAssignment
    return ClusterAssignment(np.arange(orig.n_scenarios), orig.values.copy())


def consistency_gap(result, target, players=None) -> float:
    """Largest difference between recomputed errors and the solver's own deviation variables.

    Net moment / covariance / ECDF deviations are compared everywhere; the
    aggregated errors are compared for the terms the objective pushes down
    (included terms, or active Nash players), since only those are tight.
    """
    h = result.handle
    own = solver_errors(h, result.solution, result.selection)
    rep = recompute_errors(target, result.scenarios, result.selection, h.weights, h.norm)
    gaps = [np.abs(own["moment"] - (rep.d_minus - rep.d_plus)).max(),
            np.abs(own["covariance"] - (rep.c_minus - rep.c_plus)).max(),
            np.abs(own["phi"] - rep.phi).max()]
    terms = players.active if players is not None else h.included
    for t in terms:
        gaps.append(abs(own["pi"][t] - rep.pi[t]) / max(1.0, abs(rep.pi[t])))
    return float(max(gaps))


@pytest.fixture(scope="session")
def small_instance():
    return bivariate(12, 3)


@pytest.fixture(scope="session")
def medium_instance():
    return bivariate(30, 5)
