"""DBSCAN; novelty is the distance to the nearest non-noise training point in units of eps."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._common import as_2d, check_dim, pairwise_distances

NOISE = -1


def kdist_eps(X, min_pts: int, quantile: float = 90.0) -> float:
    """Quantile of every point's distance to its ``min_pts``-th nearest other point."""
    X = as_2d(X)
    D = pairwise_distances(X, X)
    kth = np.sort(D, axis=1)[:, min(min_pts, len(X) - 1)]
    return float(np.percentile(kth, quantile))


def dbscan_labels(X, eps: float, min_pts: int) -> np.ndarray:
    """Cluster ids per point, NOISE for noise. A core point has >= min_pts neighbours within eps, itself included."""
    X = as_2d(X)
    D = pairwise_distances(X, X)
    neigh = [np.flatnonzero(row <= eps) for row in D]
    core = np.array([len(nb) >= min_pts for nb in neigh])
    labels = np.full(len(X), NOISE)
    cid = 0
    for p in range(len(X)):
        if labels[p] != NOISE or not core[p]:
            continue
        labels[p] = cid
        queue = deque(neigh[p])
        while queue:
            q = queue.popleft()
            if labels[q] == NOISE:
                labels[q] = cid
                if core[q]:
                    queue.extend(neigh[q])
        cid += 1
    return labels


@dataclass
class DBSCANModel:
    points: np.ndarray      # retained (non-noise) training points
    eps: float
    min_pts: int
    n_clusters: int = 0

    kind = "dbscan"

    def score(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.points.shape[1], "DBSCAN model")
        return pairwise_distances(V, self.points).min(axis=1) / self.eps

    def to_record(self):
        return {"eps": self.eps, "min_pts": self.min_pts, "n_clusters": self.n_clusters}, {"points": self.points}

    @classmethod
    def from_record(cls, params, arrays):
        return cls(arrays["points"], float(params["eps"]), int(params["min_pts"]), int(params["n_clusters"]))


def fit_dbscan(X, eps: float | None = None, min_pts: int = 5, seed: int = 0) -> DBSCANModel:
    X = as_2d(X)
    if len(X) <= min_pts:
        raise ValueError(f"DBSCAN needs more than min_pts={min_pts} samples, got {len(X)}")
    if eps is None:
        eps = kdist_eps(X, min_pts)
    if not eps > 0:
        raise ValueError(f"eps must be positive (got {eps}); training data may be degenerate")
    labels = dbscan_labels(X, eps, min_pts)
    keep = labels != NOISE
    if not keep.any():
        raise ValueError(f"every training point is noise at eps={eps}; use a larger eps")
    return DBSCANModel(X[keep].copy(), float(eps), int(min_pts), int(labels.max() + 1))


def nm_dbscan(m: DBSCANModel, v) -> float:
    return float(m.score(v)[0])
