"""One-class nu-SVM with an RBF kernel, solved in the dual by SMO pair updates.

Dual (scaled so the coefficients sum to one)::

    min_a  1/2 a^T Q a    s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1

Decision f(v) = sum_i a_i k(x_i, v) - rho. The novelty metric is the signed
distance to the separating hyperplane in feature space, -f(v)/||w||, so
points on the origin side score positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import as_2d, check_dim, pairwise_distances


class ConvergenceError(RuntimeError):
    pass


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    D = pairwise_distances(A, B)
    return np.exp(-gamma * D * D)


def default_gamma(X) -> float:
    X = as_2d(X)
    var = float(X.var(axis=0).mean())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def smo_one_class(Q: np.ndarray, nu: float, tol: float = 1e-4, max_iter: int = 100_000):
    """Solve the scaled one-class dual. Returns (alpha, rho, iterations, final KKT gap)."""
    n = Q.shape[0]
    C = 1.0 / (nu * n)
    # feasible start: fill coefficients to the bound in index order
    alpha = np.zeros(n)
    remaining = 1.0
    for i in range(n):
        alpha[i] = min(C, remaining)
        remaining -= alpha[i]
        if remaining <= 0:
            break
    G = Q @ alpha
    diag = np.diag(Q)
    gap = np.inf
    for it in range(1, max_iter + 1):
        # maximal violating pair: i can grow, j can shrink
        up = alpha < C - 1e-15
        low = alpha > 1e-15
        gi = np.where(up, -G, -np.inf)
        gj = np.where(low, -G, np.inf)
        i = int(np.argmax(gi))
        # second-order choice of j among the shrinkable set
        b = gi[i] - gj
        cand = low & (b > 0)
        gap = gi[i] - gj.min()
        if gap <= tol:
            break
        a = diag[i] + diag - 2.0 * Q[i]
        a = np.where(a > 1e-12, a, 1e-12)
        j = int(np.argmax(np.where(cand, b * b / a, -np.inf)))
        # move t from j to i along the equality constraint
        t = (G[j] - G[i]) / a[j]
        t = min(t, C - alpha[i], alpha[j])
        alpha[i] += t
        alpha[j] -= t
        G += t * (Q[:, i] - Q[:, j])
    else:
        raise ConvergenceError(f"SMO did not converge in {max_iter} iterations (KKT gap {gap:.3g})")
    alpha = np.clip(alpha, 0.0, C)
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    if free.any():
        rho = float(G[free].mean())
    else:
        ub = G[alpha <= 1e-12].min() if (alpha <= 1e-12).any() else G.max()
        lb = G[alpha >= C - 1e-12].max() if (alpha >= C - 1e-12).any() else G.min()
        rho = 0.5 * (ub + lb)
    return alpha, rho, it, float(gap)


@dataclass
class OCSVMModel:
    support_vectors: np.ndarray
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    w_norm: float
    n_train: int

    kind = "ocsvm"

    def decision(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.support_vectors.shape[1], "one-class SVM")
        return rbf_kernel(V, self.support_vectors, self.gamma) @ self.alpha - self.rho

    def score(self, V) -> np.ndarray:
        return -self.decision(V) / self.w_norm

    def to_record(self):
        return ({"rho": self.rho, "gamma": self.gamma, "nu": self.nu, "w_norm": self.w_norm, "n_train": self.n_train},
                {"support_vectors": self.support_vectors, "alpha": self.alpha})

    @classmethod
    def from_record(cls, params, arrays):
        return cls(arrays["support_vectors"], arrays["alpha"], float(params["rho"]), float(params["gamma"]),
                   float(params["nu"]), float(params["w_norm"]), int(params["n_train"]))


def fit_ocsvm(X, nu: float = 0.05, gamma: float | None = None, seed: int = 0, tol: float = 1e-4,
              max_iter: int = 100_000) -> OCSVMModel:
    """Fit on rows of ``X``. ``seed`` is accepted for interface symmetry; the solver is deterministic."""
    X = as_2d(X)
    if not 0 < nu <= 1:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if gamma is None:
        gamma = default_gamma(X)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    Q = rbf_kernel(X, X, gamma)
    alpha, rho, _, _ = smo_one_class(Q, nu, tol=tol, max_iter=max_iter)
    sv = alpha > 0
    w_norm = float(np.sqrt(max(alpha @ Q @ alpha, 1e-300)))
    return OCSVMModel(X[sv].copy(), alpha[sv].copy(), rho, float(gamma), float(nu), w_norm, len(X))


def nm_ocsvm(m: OCSVMModel, v) -> float:
    return float(m.score(v)[0])
