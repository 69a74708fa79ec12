"""Isolation forest with the original anomaly score 2^(-E[h(x)] / c(psi))."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._common import as_2d, check_dim

EULER_GAMMA = 0.5772156649015329


def harmonic(n: int) -> float:
    if n < 1:
        return 0.0
    if n <= 1000:
        return float(sum(1.0 / i for i in range(1, n + 1)))
    return math.log(n) + EULER_GAMMA + 1.0 / (2 * n) - 1.0 / (12 * n * n)


def c_factor(n) -> float:
    """Average unsuccessful-search path length in a BST of n nodes; c(1) = c(0) = 0."""
    n = int(n)
    if n <= 1:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


@dataclass
class Tree:
    # flat node arrays; leaves have feature == -1
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    def leaf_path(self) -> np.ndarray:
        """Depth plus c(size) for every node; only meaningful at leaves."""
        return self.depth + np.array([c_factor(n) for n in self.size])

    def path_lengths(self, V: np.ndarray) -> np.ndarray:
        node = np.zeros(len(V), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            idx = np.flatnonzero(inner)
            go_left = V[idx, f[idx]] < self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.leaf_path()[node]


def build_tree(X: np.ndarray, rng: np.random.Generator, max_depth: int) -> Tree:
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def grow(rows: np.ndarray, d: int) -> int:
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(len(rows))
        depth.append(d)
        if len(rows) <= 1 or d >= max_depth:
            return nid
        sub = X[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            return nid
        q = int(splittable[rng.integers(splittable.size)])
        p = float(rng.uniform(lo[q], hi[q]))
        if not lo[q] < p:
            # uniform() can return the lower endpoint; nudge so both sides are nonempty
            p = float(np.nextafter(lo[q], hi[q]))
        mask = sub[:, q] < p
        feature[nid] = q
        threshold[nid] = p
        left[nid] = grow(rows[mask], d + 1)
        right[nid] = grow(rows[~mask], d + 1)
        return nid

    grow(np.arange(len(X)), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(size), np.array(depth, dtype=float))


@dataclass
class IForestModel:
    trees: list[Tree]
    psi: int
    n_features: int
    c_psi: float = field(init=False)

    kind = "iforest"

    def __post_init__(self):
        self.c_psi = c_factor(self.psi)
        # all trees padded into (n_trees, max_nodes) tables so one pass walks the whole forest
        width = max(len(t.feature) for t in self.trees)
        shape = (len(self.trees), width)
        self._feature = np.full(shape, -1, dtype=np.int64)
        self._threshold = np.zeros(shape)
        self._left = np.zeros(shape, dtype=np.int64)
        self._right = np.zeros(shape, dtype=np.int64)
        self._leaf_path = np.zeros(shape)
        for i, t in enumerate(self.trees):
            n = len(t.feature)
            self._feature[i, :n] = t.feature
            self._threshold[i, :n] = t.threshold
            self._left[i, :n] = t.left
            self._right[i, :n] = t.right
            self._leaf_path[i, :n] = t.leaf_path()

    def mean_path_length(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.n_features, "isolation forest")
        T = len(self.trees)
        rows = np.arange(T)[:, None]
        node = np.zeros((T, len(V)), dtype=np.int64)
        cols = np.broadcast_to(np.arange(len(V)), node.shape)
        while True:
            f = self._feature[rows, node]
            inner = f >= 0
            if not inner.any():
                break
            ti, si = np.nonzero(inner)
            n = node[ti, si]
            go_left = V[cols[ti, si], f[ti, si]] < self._threshold[ti, n]
            node[ti, si] = np.where(go_left, self._left[ti, n], self._right[ti, n])
        return self._leaf_path[rows, node].mean(axis=0)

    def score(self, V) -> np.ndarray:
        h = self.mean_path_length(V)
        if self.c_psi == 0:
            return np.full(len(h), 0.5)
        return np.power(2.0, -h / self.c_psi)

    def to_record(self):
        offsets = np.cumsum([0] + [len(t.feature) for t in self.trees])
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])  # noqa: E731
        return ({"psi": self.psi, "n_features": self.n_features, "n_trees": len(self.trees)},
                {"offsets": offsets, "feature": cat("feature"), "threshold": cat("threshold"),
                 "left": cat("left"), "right": cat("right"), "size": cat("size"), "depth": cat("depth")})

    @classmethod
    def from_record(cls, params, arrays):
        o = arrays["offsets"]
        trees = [
            Tree(*(arrays[k][o[i]:o[i + 1]] for k in ("feature", "threshold", "left", "right", "size", "depth")))
            for i in range(len(o) - 1)
        ]
        return cls(trees, int(params["psi"]), int(params["n_features"]))


def fit_iforest(X, trees: int = 100, psi: int = 256, seed: int = 0) -> IForestModel:
    X = as_2d(X)
    if len(X) < 2:
        raise ValueError("isolation forest needs at least 2 samples")
    if trees < 1:
        raise ValueError("need at least one tree")
    psi = min(int(psi), len(X))
    max_depth = math.ceil(math.log2(psi))
    rng = np.random.default_rng(seed)
    forest = []
    for _ in range(trees):
        rows = rng.choice(len(X), size=psi, replace=False)
        forest.append(build_tree(X[rows], rng, max_depth))
    return IForestModel(forest, psi, X.shape[1])


def anomaly_score(mean_path: float, psi: int) -> float:
    return float(2.0 ** (-mean_path / c_factor(psi)))


def nm_iforest(m: IForestModel, v) -> float:
    return float(m.score(v)[0])
