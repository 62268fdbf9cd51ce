"""Gaussian-copula sampling of correlated original scenarios."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import ndtr

from ..stats import ScenarioSet
from .pearson import MarginalModel


class CorrelationError(ValueError):
    """Correlation matrix is not a valid (PSD, unit-diagonal, symmetric) matrix."""


def correlation_factor(corr: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == corr``; works for singular PSD matrices too."""
    R = np.asarray(corr, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise CorrelationError("correlation matrix must be square")
    if not np.allclose(R, R.T, atol=1e-12):
        raise CorrelationError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-9):
        raise CorrelationError("correlation matrix must have a unit diagonal")
    w, V = np.linalg.eigh(R)
    if w.min() < -tol:
        raise CorrelationError(f"correlation matrix is not positive semidefinite "
                               f"(smallest eigenvalue {w.min():.3e})")
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        return V * np.sqrt(np.clip(w, 0.0, None))


def sample_original(marginals: Sequence[MarginalModel], corr: np.ndarray, n: int, seed: int,
                    names: Sequence[str] | None = None) -> ScenarioSet:
    """``n`` equiprobable scenarios with the given marginals and Gaussian dependence.

    Each marginal contributes a pool of ``n`` draws; copula pseudo-observations
    are mapped onto the pool through its empirical quantile function with
    linear interpolation between order statistics.
    """
    k = len(marginals)
    if k == 0:
        raise ValueError("need at least one marginal")
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k + 1)]
    if k == 1:
        return ScenarioSet.equiprobable(marginals[0].sample(n, streams[0])[:, None], names)
    L = correlation_factor(corr)
    if L.shape[0] != k:
        raise CorrelationError(f"correlation is {L.shape[0]}x{L.shape[0]} but {k} marginals were given")
    z = streams[k].standard_normal((n, k)) @ L.T
    obs = ndtr(z)
    grid = np.linspace(0.0, 1.0, n)
    X = np.empty((n, k))
    for i, mm in enumerate(marginals):
        pool = np.sort(mm.sample(n, streams[i]))
        X[:, i] = np.interp(obs[:, i], grid, pool)
    return ScenarioSet.equiprobable(X, names)
