"""Daubechies filters and a periodized wavelet packet decomposition."""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def daubechies(order: int) -> np.ndarray:
    """Extremal-phase Daubechies scaling filter with ``order`` vanishing moments (2*order taps).

    Normalized so the taps sum to sqrt(2). Built by spectral factorization of
    the maxflat half-band polynomial, keeping the roots inside the unit circle.
    """
    if order < 1:
        raise ValueError("Daubechies order must be >= 1")
    if order > 20:
        raise ValueError("Daubechies orders above 20 are numerically unreliable")
    if order == 1:
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
        h.setflags(write=False)
        return h

    # P(y) = sum_k C(N-1+k, k) y^k with y = (2 - z - 1/z)/4; roots of P in y
    # map to quadruplets/pairs of roots in z.
    p = [comb(order - 1 + k, k) for k in range(order)]
    y_roots = np.roots(p[::-1])
    z_roots = []
    for y in y_roots:
        # y = (2 - z - 1/z)/4  ->  z^2 - (2 - 4y) z + 1 = 0
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        z_roots.append(pair[np.argmin(np.abs(pair))])
    poly = np.array([1.0 + 0j])
    for z in z_roots:
        poly = np.convolve(poly, [1.0, -z])
    for _ in range(order):
        poly = np.convolve(poly, [1.0, 1.0])
    h = np.real(poly)
    h = h * (np.sqrt(2.0) / h.sum())
    h.setflags(write=False)
    return h


def qmf(h: np.ndarray) -> np.ndarray:
    """High-pass partner g[k] = (-1)^k h[L-1-k]."""
    L = len(h)
    return np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])


def _filter_matrix_indices(m: int, taps: int) -> np.ndarray:
    # row n reads x[(2n + k) mod m] for k = 0..taps-1
    n = np.arange(m // 2)[:, None]
    k = np.arange(taps)[None, :]
    return (2 * n + k) % m


def dwt_step(x: np.ndarray, h: np.ndarray, g: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One periodized analysis step along the last axis.

    Odd lengths are zero-padded by one sample so the step stays orthogonal
    and outputs ceil(N/2) coefficients per band.
    """
    if g is None:
        g = qmf(h)
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    if m % 2:
        x = np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)
        m += 1
    idx = _filter_matrix_indices(m, len(h))
    windows = x[..., idx]
    return windows @ h, windows @ g


def wpd(x: np.ndarray, h: np.ndarray, levels: int) -> list[np.ndarray]:
    """Full packet tree to depth ``levels``; leaves in natural tree order (low branch first)."""
    nodes = [np.asarray(x, dtype=float)]
    g = qmf(h)
    for _ in range(levels):
        nxt = []
        for node in nodes:
            lo, hi = dwt_step(node, h, g)
            nxt.extend((lo, hi))
        nodes = nxt
    return nodes


def wpd_batch(X: np.ndarray, h: np.ndarray, levels: int) -> np.ndarray:
    """Leaf l2 norms for every row of ``X``: shape (n_rows, 2**levels).

    Rows are decomposed together; each level is a single batched step over
    all current nodes since they share a length.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    nodes = X[:, None, :]
    g = qmf(h)
    for _ in range(levels):
        lo, hi = dwt_step(nodes, h, g)
        nodes = np.stack([lo, hi], axis=2).reshape(X.shape[0], -1, lo.shape[-1])
    return np.sqrt(np.sum(nodes * nodes, axis=-1))


def leaf_length(n: int, levels: int) -> int:
    for _ in range(levels):
        n = -(-n // 2)
    return n
