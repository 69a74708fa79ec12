"""K-means++ with silhouette model selection and a radius-normalized novelty metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._common import as_2d, check_dim, pairwise_distances

RADIUS_FLOOR = 1e-12


def silhouette_samples(X, labels) -> np.ndarray:
    X = as_2d(X)
    labels = np.asarray(labels)
    ids = np.unique(labels)
    if ids.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    D = pairwise_distances(X, X)
    sizes = np.array([(labels == c).sum() for c in ids])
    # mean distance from every sample to every cluster (self included in the sum, contributes 0)
    sums = np.column_stack([D[:, labels == c].sum(axis=1) for c in ids])
    own = np.searchsorted(ids, labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(len(X)), own] / np.maximum(own_size - 1, 1), 0.0)
    means = sums / sizes[None, :]
    means[np.arange(len(X)), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own_size == 1] = 0.0
    return s


def silhouette(X, labels) -> float:
    """Mean silhouette; singleton-cluster samples and a = b = 0 count as 0."""
    return float(silhouette_samples(X, labels).mean())


def kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300) -> tuple[np.ndarray, np.ndarray, int]:
    """Lloyd iterations until the assignment stops changing; returns (centers, labels, iterations)."""
    centers = centers.copy()
    labels = None
    k = centers.shape[0]
    for it in range(1, max_iter + 1):
        D = pairwise_distances(X, centers)
        new = D.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # empty cluster: move it onto the point farthest from its current centroid
            far = int(np.argmax(D[np.arange(len(X)), new]))
            centers[c] = X[far]
            new[far] = c
            D = pairwise_distances(X, centers)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = X[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return centers, labels, it


def cluster_radii(X, centers, labels) -> np.ndarray:
    X = as_2d(X)
    r = np.zeros(centers.shape[0])
    for c in range(centers.shape[0]):
        members = X[labels == c]
        if len(members):
            r[c] = pairwise_distances(members, centers[c:c + 1]).max()
    positive = r[r > 0]
    fill = positive.min() if positive.size else RADIUS_FLOOR
    return np.where(r > 0, r, fill)


@dataclass
class KMeansModel:
    centroids: np.ndarray
    radii: np.ndarray
    k: int
    silhouette: float
    silhouette_by_k: dict = field(default_factory=dict)

    kind = "kmeans"

    def score(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.centroids.shape[1], "k-means model")
        D = pairwise_distances(V, self.centroids)
        i = D.argmin(axis=1)
        d = D[np.arange(len(V)), i]
        r = self.radii[i]
        return (d - r) / r

    def to_record(self):
        return ({"k": self.k, "silhouette": self.silhouette,
                 "silhouette_by_k": {str(k): v for k, v in self.silhouette_by_k.items()}},
                {"centroids": self.centroids, "radii": self.radii})

    @classmethod
    def from_record(cls, params, arrays):
        return cls(arrays["centroids"], arrays["radii"], int(params["k"]), float(params["silhouette"]),
                   {int(k): v for k, v in params.get("silhouette_by_k", {}).items()})


def kmeans(X, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300):
    """Best-inertia k-means++ / Lloyd run out of ``n_init`` restarts."""
    X = as_2d(X)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers, labels, _ = lloyd(X, kmeanspp_init(X, k, rng), max_iter)
        inertia = float(np.sum((X - centers[labels]) ** 2))
        if best is None or inertia < best[0]:
            best = (inertia, centers, labels)
    return best[1], best[2]


def fit_kmeans(X, k_range=range(2, 11), seed: int = 0, n_init: int = 10, max_iter: int = 300) -> KMeansModel:
    X = as_2d(X)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > len(X) - 1:
        raise ValueError(f"k_range must lie within [2, {len(X) - 1}] for {len(X)} samples")
    best = None
    scores = {}
    for k in ks:
        centers, labels = kmeans(X, k, seed=seed, n_init=n_init, max_iter=max_iter)
        if np.unique(labels).size < 2:
            continue
        s = silhouette(X, labels)
        scores[k] = s
        if best is None or s > best[0]:
            best = (s, k, centers, labels)
    if best is None:
        raise ValueError("k-means could not form two distinct clusters for any k")
    s, k, centers, labels = best
    return KMeansModel(centers, cluster_radii(X, centers, labels), k, s, scores)


def nm_kmeans(m: KMeansModel, v) -> float:
    return float(m.score(v)[0])
