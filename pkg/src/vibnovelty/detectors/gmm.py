"""Full-covariance Gaussian mixture fitted by EM, order chosen by BIC.

The covariance update is Sigma_k = (S_k + n*reg*I) / N_k where S_k is the
weighted scatter. That is the exact M-step for the log-likelihood penalized by
-(n*reg/2) * sum_k tr(Sigma_k^-1), so EM ascends the penalized objective
monotonically; for K = 1 it reduces to the sample covariance plus reg*I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from ._common import as_2d, check_dim
from .kmeans import kmeanspp_init

REG_COVAR = 1e-6


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


def _chol(cov: np.ndarray, k: int) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(f"covariance of component {k} is singular after regularization") from None


def _log_gauss(X, mean, chol) -> np.ndarray:
    d = X.shape[1]
    z = solve_triangular(chol, (X - mean).T, lower=True)
    maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)


@dataclass
class GMMModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float = float("nan")
    bic: float = float("nan")
    bic_by_k: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)
    n_iter: int = 0

    kind = "gmm"

    def __post_init__(self):
        self._chols = [_chol(c, k) for k, c in enumerate(self.covariances)]

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def log_density(self, V) -> np.ndarray:
        V = as_2d(V)
        check_dim(V, self.means.shape[1], "GMM")
        comp = np.column_stack([
            np.log(w) + _log_gauss(V, mu, L) for w, mu, L in zip(self.weights, self.means, self._chols)
        ])
        return logsumexp(comp, axis=1)

    def score(self, V) -> np.ndarray:
        return -self.log_density(V)

    def to_record(self):
        return ({"log_likelihood": self.log_likelihood, "bic": self.bic, "n_iter": self.n_iter,
                 "bic_by_k": {str(k): v for k, v in self.bic_by_k.items()}},
                {"weights": self.weights, "means": self.means,
                 "covariances": self.covariances.reshape(self.n_components, -1)})

    @classmethod
    def from_record(cls, params, arrays):
        k, d = arrays["means"].shape
        return cls(arrays["weights"], arrays["means"], arrays["covariances"].reshape(k, d, d),
                   float(params["log_likelihood"]), float(params["bic"]),
                   {int(a): b for a, b in params.get("bic_by_k", {}).items()}, n_iter=int(params["n_iter"]))


def _m_step(X, resp, reg):
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for k in range(resp.shape[1]):
        diff = X - means[k]
        scatter = (resp[:, k, None] * diff).T @ diff
        covs[k] = (scatter + n * reg * np.eye(d)) / nk[k]
    return weights, means, covs


def _e_step(X, weights, means, covs):
    chols = [_chol(c, k) for k, c in enumerate(covs)]
    comp = np.column_stack([np.log(w) + _log_gauss(X, mu, L) for w, mu, L in zip(weights, means, chols)])
    ll_i = logsumexp(comp, axis=1)
    return np.exp(comp - ll_i[:, None]), float(ll_i.sum()), chols


def _penalty(covs, chols, n, reg):
    # -(n*reg/2) * sum_k tr(Sigma_k^-1)
    total = 0.0
    for L in chols:
        Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
        total += np.sum(Linv * Linv)
    return -0.5 * n * reg * total


def em(X, k: int, seed: int = 0, reg: float = REG_COVAR, max_iter: int = 500, tol: float = 1e-10):
    """EM from k-means++ hard responsibilities. Returns (weights, means, covs, loglik, penalized history)."""
    X = as_2d(X)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    centers = kmeanspp_init(X, k, rng)
    d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), d2.argmin(axis=1)] = 1.0
    weights, means, covs = _m_step(X, resp, reg)
    history = []
    ll = -np.inf
    for _ in range(max_iter):
        resp, ll, chols = _e_step(X, weights, means, covs)
        objective = ll + _penalty(covs, chols, n, reg)
        history.append(objective)
        if len(history) > 1 and history[-1] - history[-2] <= tol * max(1.0, abs(history[-1])):
            break
        weights, means, covs = _m_step(X, resp, reg)
    return weights, means, covs, ll, history


def n_parameters(k: int, d: int) -> int:
    return (k - 1) + k * d + k * d * (d + 1) // 2


def fit_gmm(X, k_range=range(1, 6), seed: int = 0, reg: float = REG_COVAR, max_iter: int = 500) -> GMMModel:
    X = as_2d(X)
    n, d = X.shape
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise ValueError("k_range must contain positive component counts")
    if n < 2 * ks[-1]:
        raise ValueError(f"GMM with up to {ks[-1]} components needs at least {2 * ks[-1]} samples, got {n}")
    best = None
    bics = {}
    for k in ks:
        w, mu, cov, ll, hist = em(X, k, seed=seed, reg=reg, max_iter=max_iter)
        bic = -2.0 * ll + n_parameters(k, d) * np.log(n)
        bics[k] = float(bic)
        if best is None or bic < best[0]:
            best = (bic, w, mu, cov, ll, hist)
    bic, w, mu, cov, ll, hist = best
    return GMMModel(w, mu, cov, float(ll), float(bic), bics, hist, len(hist))


def nm_gmm(m: GMMModel, v) -> float:
    """Negative log mixture density; larger means more novel."""
    return float(m.score(v)[0])
