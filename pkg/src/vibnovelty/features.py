"""Statistical + wavelet-packet feature vectors and the train-fitted z-score normalizer."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal_lab import TimeSeries
from .wavelets import daubechies, leaf_length, wpd_batch

STAT_NAMES = ("mean", "rms", "p2p", "std", "skew", "kurt")


@dataclass(frozen=True)
class WaveletSpec:
    family: str = "db4"
    levels: int = 6
    boundary_mode: str = "periodization"

    def __post_init__(self):
        if not self.family.startswith("db") or not self.family[2:].isdigit():
            raise ValueError(f"unsupported wavelet family {self.family!r}; use 'db<N>'")
        if self.boundary_mode != "periodization":
            raise ValueError("only periodization boundary handling is supported")
        if self.levels < 0:
            raise ValueError("levels must be >= 0")

    @property
    def filter(self) -> np.ndarray:
        return daubechies(int(self.family[2:]))

    @property
    def n_features(self) -> int:
        return 2 ** self.levels + len(STAT_NAMES)


def feature_names(levels: int) -> list[str]:
    return list(STAT_NAMES) + [f"wpd_{i:03d}" for i in range(2 ** levels)]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        x = x.samples
    return np.atleast_2d(np.asarray(x, dtype=float))


def stat_features_batch(X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[1] == 0:
        raise ValueError("cannot compute features of an empty signal")
    mean = X.mean(axis=1)
    rms = np.sqrt(np.mean(X * X, axis=1))
    p2p = X.max(axis=1) - X.min(axis=1)
    dev = X - mean[:, None]
    m2 = np.mean(dev ** 2, axis=1)
    m3 = np.mean(dev ** 3, axis=1)
    m4 = np.mean(dev ** 4, axis=1)
    std = np.sqrt(m2)
    flat = m2 == 0
    safe = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe ** 1.5)
    kurt = np.where(flat, 0.0, m4 / safe ** 2 - 3.0)
    return np.column_stack([mean, rms, p2p, std, skew, kurt])


def stat_features(ts) -> np.ndarray:
    """Mean, RMS, P2P, population STD, skewness and excess kurtosis.

    Skewness and kurtosis are 0 for a constant signal.
    """
    return stat_features_batch(ts)[0]


def _check_depth(n: int, levels: int):
    if n < 2 ** levels:
        raise ValueError(f"WPD depth {levels} needs at least {2 ** levels} samples, got {n}")


def wpd_norms(ts, spec: WaveletSpec = WaveletSpec()) -> np.ndarray:
    X = _as_matrix(ts)
    _check_depth(X.shape[1], spec.levels)
    return wpd_batch(X, spec.filter, spec.levels)[0]


def extract_batch(X, spec: WaveletSpec = WaveletSpec()) -> np.ndarray:
    """Feature matrix (n_chunks, 2**L + 6) for a stack of equal-length chunks."""
    X = _as_matrix(X)
    _check_depth(X.shape[1], spec.levels)
    return np.hstack([stat_features_batch(X), wpd_batch(X, spec.filter, spec.levels)])


def extract(ts, spec: WaveletSpec = WaveletSpec()) -> np.ndarray:
    return extract_batch(ts, spec)[0]


def leaf_sizes(n: int, spec: WaveletSpec) -> int:
    return leaf_length(n, spec.levels)


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        s = np.asarray(self.std, dtype=float)
        if m.shape != s.shape or m.ndim != 1:
            raise ValueError("mean and std must be 1-D arrays of equal length")
        if np.any(s < 0):
            raise ValueError("std entries must be >= 0")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_normalizer(X) -> Normalizer:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_normalizer needs a matrix with at least 2 rows")
    return Normalizer(X.mean(axis=0), X.std(axis=0))


def normalize(v, n: Normalizer) -> np.ndarray:
    """Z-score rows (or a single vector); zero-std features map to 0."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n.dim:
        raise ValueError(f"feature dimension {v.shape[-1]} does not match normalizer dimension {n.dim}")
    live = n.std > 0
    out = np.zeros_like(v)
    out[..., live] = (v[..., live] - n.mean[live]) / n.std[live]
    return out


def denormalize(z, n: Normalizer) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != n.dim:
        raise ValueError(f"feature dimension {z.shape[-1]} does not match normalizer dimension {n.dim}")
    return z * n.std + n.mean


def write_feature_matrix(path, F: np.ndarray, levels: int) -> None:
    F = np.asarray(F, dtype=float)
    names = feature_names(levels)
    if F.ndim != 2 or F.shape[1] != len(names):
        raise ValueError(f"feature matrix must have {len(names)} columns")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in F:
            w.writerow([repr(float(v)) for v in row])


def read_feature_matrix(path) -> tuple[list[str], np.ndarray]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty feature file")
    header, body = rows[0], rows[1:]
    F = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return header, F
