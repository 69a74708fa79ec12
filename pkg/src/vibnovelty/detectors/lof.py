"""Local outlier factor in novelty mode: queries are scored against the training points only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import as_2d, check_dim, pairwise_distances

REACH_FLOOR = 1e-12


def _knn(D: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(D, axis=1, kind="stable")[:, :k]


@dataclass
class LOFModel:
    points: np.ndarray
    k: int
    k_distance: np.ndarray
    lrd: np.ndarray

    kind = "lof"

    def score(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.points.shape[1], "LOF model")
        D = pairwise_distances(V, self.points)
        nn = _knn(D, self.k)
        d = np.take_along_axis(D, nn, axis=1)
        reach = np.maximum(self.k_distance[nn], d)
        lrd_v = 1.0 / np.maximum(reach.mean(axis=1), REACH_FLOOR)
        return self.lrd[nn].mean(axis=1) / lrd_v

    def to_record(self):
        return {"k": self.k}, {"points": self.points, "k_distance": self.k_distance, "lrd": self.lrd}

    @classmethod
    def from_record(cls, params, arrays):
        return cls(arrays["points"], int(params["k"]), arrays["k_distance"], arrays["lrd"])


def fit_lof(X, k: int = 20, seed: int = 0) -> LOFModel:
    X = as_2d(X)
    n = len(X)
    if not 1 <= k < n:
        raise ValueError(f"LOF needs 1 <= k < n_samples ({n}), got k={k}")
    D = pairwise_distances(X, X)
    np.fill_diagonal(D, np.inf)
    nn = _knn(D, k)
    dist = np.take_along_axis(D, nn, axis=1)
    kdist = dist[:, -1]
    reach = np.maximum(kdist[nn], dist)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), REACH_FLOOR)
    return LOFModel(X.copy(), int(k), kdist, lrd)


def nm_lof(m: LOFModel, v) -> float:
    return float(m.score(v)[0])
