import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats as sps

from scengen.sampling import (CorrelationError, MomentRegionError, correlation_factor, empirical_marginal,
                              fit_pearson, kmeans, sample_original, within_sse)
from scengen.sampling.pearson import kappa

TYPE_V_KURT = optimize.brentq(lambda b: kappa(1.0, b) - 1.0, 4.51, 20.0)

# (mean, variance, skewness, kurtosis) -> expected family; tails kept light enough
# for the fourth sample moment to settle at 10^6 draws
MOMENT_CASES = [
    ((0, 1, 0, 3), "normal"),
    ((0, 1, 0, 1.8), "beta"),
    ((1, 2, 1, 3.5), "beta"),
    ((1, 2, -1, 3.5), "beta"),
    ((0, 1, 1, 4.5), "gamma"),
    ((0, 1, -1, 4.5), "gamma"),
    ((0, 1, 1, TYPE_V_KURT), "inverse-gamma"),
    ((0, 1, 1, 4.8), "beta-prime"),
    ((3, 1, -1, 4.8), "beta-prime"),
    ((0, 1, 0.3, 3.4), "pearson-iv"),
    ((10, 0.5, -0.3, 3.4), "pearson-iv"),
    ((2, 4, 0, 3.6), "student-t"),
]


def sample_moments(x):
    mu = x.mean()
    v = x.var()
    return mu, v, ((x - mu) ** 3).mean() / v ** 1.5, ((x - mu) ** 4).mean() / v ** 2


def test_normal_point():
    m = fit_pearson(0, 1, 0, 3)
    assert m.family == "normal" and m.params == {"loc": 0, "scale": 1.0}


def test_symmetric_beta():
    m = fit_pearson(0, 1, 0, 1.8)
    assert m.family == "beta" and m.pearson_type == "II"
    assert m.params["alpha"] == pytest.approx(m.params["beta"])


def test_moment_region_boundary():
    with pytest.raises(MomentRegionError, match="skewness"):
        fit_pearson(0, 1, 0, 1.0)
    with pytest.raises(MomentRegionError):
        fit_pearson(0, 0, 0, 3)


@pytest.mark.parametrize("moments,family", MOMENT_CASES, ids=[f"{f}-{i}" for i, (_, f) in enumerate(MOMENT_CASES)])
def test_sampled_moments_converge(moments, family):
    mean, var, skew, kurt = moments
    m = fit_pearson(*moments)
    assert m.family == family
    x = m.sample(10 ** 6, np.random.default_rng(0))
    mu, v, s, k = sample_moments(x)
    sd = np.sqrt(var)
    assert abs(mu - mean) <= 0.02 * max(abs(mean), sd)
    assert abs(v - var) <= 0.02 * var
    assert abs(s - skew) <= 0.10 * max(abs(skew), 1.0)
    assert abs(k - kurt) <= 0.10 * kurt


def test_empirical_marginal_reproduces_range():
    data = np.random.default_rng(1).gamma(2.0, size=500)
    m = empirical_marginal(data)
    x = m.sample(1000, np.random.default_rng(2))
    assert data.min() <= x.min() and x.max() <= data.max()
    assert m.mean == pytest.approx(data.mean())


# -- copula ------------------------------------------------------------------------------
def test_single_parameter_returns_marginal_sample():
    m = fit_pearson(5, 2, 0.5, 3.5)
    s = sample_original([m], np.ones((1, 1)), 1000, seed=7)
    assert s.n_scenarios == 1000 and np.allclose(s.probs, 1e-3)
    rng = np.random.default_rng(np.random.SeedSequence(7).spawn(2)[0])
    assert np.array_equal(s.values[:, 0], m.sample(1000, rng))


def test_identity_correlation_independence():
    ms = [fit_pearson(0, 1, 0, 3), fit_pearson(1, 2, 0.5, 3.5)]
    s = sample_original(ms, np.eye(2), 10 ** 4, seed=3)
    rho = sps.spearmanr(s.values[:, 0], s.values[:, 1]).statistic
    assert abs(rho) <= 0.05


def test_target_correlation_with_normal_marginals():
    ms = [fit_pearson(0, 1, 0, 3), fit_pearson(5, 4, 0, 3)]
    R = np.array([[1, 0.8], [0.8, 1]])
    s = sample_original(ms, R, 10 ** 4, seed=4)
    assert np.corrcoef(s.values.T)[0, 1] == pytest.approx(0.8, abs=0.05)


def test_marginals_preserved_ks():
    ms = [fit_pearson(0, 1, 1, 4.5), fit_pearson(2, 1, -0.3, 3.4)]
    R = np.array([[1, 0.5], [0.5, 1]])
    n, seed = 10 ** 4, 11
    s = sample_original(ms, R, n, seed=seed)
    streams = [np.random.default_rng(q) for q in np.random.SeedSequence(seed).spawn(3)]
    for i, m in enumerate(ms):
        pool = m.sample(n, streams[i])
        assert sps.ks_2samp(s.values[:, i], pool).pvalue > 0.01


def test_non_psd_reports_smallest_eigenvalue():
    R = np.array([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])
    with pytest.raises(CorrelationError, match="smallest eigenvalue -"):
        correlation_factor(R)


def test_singular_psd_factor():
    R = np.ones((2, 2))
    L = correlation_factor(R)
    assert np.allclose(L @ L.T, R)


def test_sampling_is_deterministic():
    ms = [fit_pearson(0, 1, 0.2, 3.2), fit_pearson(0, 1, 0, 3)]
    R = np.array([[1, 0.3], [0.3, 1]])
    a = sample_original(ms, R, 500, seed=123)
    b = sample_original(ms, R, 500, seed=123)
    assert a.to_csv() == b.to_csv()


# -- kmeans -------------------------------------------------------------------------------
def test_k_equals_n():
    X = np.random.default_rng(0).random((7, 2))
    c = kmeans(X, 7)
    assert sorted(c.labels.tolist()) == list(range(7))
    assert within_sse(X, c.labels) == 0.0


def test_single_cluster_centroid_is_mean():
    X = np.random.default_rng(1).random((9, 3))
    c = kmeans(X, 1)
    assert np.allclose(c.centroids[0], X.mean(axis=0))


def test_two_blobs_match_best_two_partition():
    X = np.array([[0, 0], [0.2, 0.1], [0.1, 0.3], [5, 5], [5.2, 4.9], [4.8, 5.1]])
    c = kmeans(X, 2, seed=0)
    Z = (X - X.mean(0)) / X.std(0)
    best = min((within_sse(Z, np.array(bits)), bits) for bits in itertools.product((0, 1), repeat=6)
               if 0 < sum(bits) < 6)
    assert within_sse(Z, c.labels) == pytest.approx(best[0])
    assert len(set(c.labels[:3])) == 1 and len(set(c.labels[3:])) == 1


def test_k_larger_than_n():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 1)), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 8))
def test_kmeans_properties(seed, k):
    X = np.random.default_rng(seed).normal(size=(40, 2))
    c = kmeans(X, k, seed=seed)
    assert sorted(set(c.labels.tolist())) == list(range(k))
    h = np.array(c.sse_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h.max()))
    again = kmeans(X, k, seed=seed)
    assert np.array_equal(c.labels, again.labels)


def test_duplicate_points_still_fill_every_cluster():
    X = np.zeros((5, 2))
    c = kmeans(X, 3)
    assert sorted(set(c.labels.tolist())) == [0, 1, 2]
