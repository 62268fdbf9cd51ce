"""Lloyd's k-means with k-means++ seeding on standardised coordinates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 300


@dataclass
class ClusterAssignment:
    """``labels[n]`` in ``0..K-1``; ``centroids`` in the original units."""

    labels: np.ndarray
    centroids: np.ndarray
    sse_history: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def groups(self) -> list[np.ndarray]:
        return [self.members(k) for k in range(self.k)]


def _sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _plusplus(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((Z - Z[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centre; take the first unused
            unused = np.setdiff1d(np.arange(n), chosen)
            nxt = int(unused[0])
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((Z - Z[nxt]) ** 2).sum(axis=1))
    return Z[chosen].copy()


def kmeans(values: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterAssignment:
    """Cluster rows of ``values`` (scenarios x parameters) into ``k`` nonempty groups."""
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    rng = np.random.default_rng(seed)
    C = _plusplus(Z, k, rng)
    labels = np.full(n, -1)
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(Z, C)
        new = d2.argmin(axis=1)
        # reseed empty clusters with the point farthest from its centre
        for c in range(k):
            if not np.any(new == c):
                own = d2[np.arange(n), new]
                counts = np.bincount(new, minlength=k)
                own = np.where(counts[new] > 1, own, -1.0)
                far = int(np.argmax(own))
                new[far] = c
        if np.array_equal(new, labels):
            break
        labels = new
        C = np.array([Z[labels == c].mean(axis=0) for c in range(k)])
        history.append(float(((Z - C[labels]) ** 2).sum()))
    centroids = np.array([X[labels == c].mean(axis=0) for c in range(k)])
    return ClusterAssignment(labels.astype(int), centroids, history, it)


def within_sse(values: np.ndarray, labels: np.ndarray) -> float:
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return float(sum(((X[labels == c] - X[labels == c].mean(axis=0)) ** 2).sum()
                     for c in np.unique(labels)))
