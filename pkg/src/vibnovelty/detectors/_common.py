from __future__ import annotations

import numpy as np

_BLOCK_BYTES = 32 * 1024 * 1024


def as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("expected a vector or a 2-D matrix")
    return X


def pairwise_distances(A, B) -> np.ndarray:
    """Euclidean distances by explicit differences (exact on axis-aligned cases)."""
    A = as_2d(A)
    B = as_2d(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _BLOCK_BYTES // (8 * max(1, B.size)))
    for s in range(0, A.shape[0], step):
        d = A[s:s + step, None, :] - B[None, :, :]
        out[s:s + step] = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return out


def check_dim(V: np.ndarray, dim: int, what: str):
    if V.shape[1] != dim:
        raise ValueError(f"{what} expects {dim}-dimensional input, got {V.shape[1]}")
