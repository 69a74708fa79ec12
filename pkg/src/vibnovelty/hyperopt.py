"""Gaussian-process Bayesian optimization of transform hyperparameters.

The objective is the variance of the raw novelty metric over the held-out
nominal slice; it is the only quantity available at tuning time that does not
require novel data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import norm

from .benchmark import EvalProtocol, nm_variance
from .detectors import fit_detector
from .features import WaveletSpec, extract_batch, fit_normalizer, normalize
from .signal_lab import Dataset
from .transform import apply, fit_transform_model

JITTER = 1e-8
N_CANDIDATES = 1024


@dataclass(frozen=True)
class Param:
    name: str
    kind: str                  # "int", "cat", "real", "logreal"
    low: float = 0.0
    high: float = 1.0
    choices: tuple = ()

    def __post_init__(self):
        if self.kind == "cat":
            if not self.choices:
                raise ValueError(f"categorical parameter {self.name!r} needs choices")
        elif self.kind in ("int", "real", "logreal"):
            if not self.low <= self.high:
                raise ValueError(f"parameter {self.name!r} has an empty range [{self.low}, {self.high}]")
            if self.kind == "logreal" and self.low <= 0:
                raise ValueError(f"log-scaled parameter {self.name!r} needs a positive lower bound")
        else:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    def from_unit(self, u: float):
        u = min(max(float(u), 0.0), 1.0)
        if self.kind == "cat":
            return self.choices[min(int(u * len(self.choices)), len(self.choices) - 1)]
        if self.kind == "int":
            return int(min(self.high, max(self.low, round(self.low + u * (self.high - self.low)))))
        if self.kind == "logreal":
            return float(math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low))))
        return float(self.low + u * (self.high - self.low))

    def to_unit(self, v) -> float:
        if self.kind == "cat":
            return (self.choices.index(v) + 0.5) / len(self.choices)
        if self.high == self.low:
            return 0.5
        if self.kind == "logreal":
            return (math.log(v) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        return (float(v) - self.low) / (self.high - self.low)


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[Param, ...]

    def __post_init__(self):
        if not self.params:
            raise ValueError("search space is empty")

    @property
    def dim(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def decode(self, u) -> dict:
        return {p.name: p.from_unit(x) for p, x in zip(self.params, u)}

    def encode(self, values: dict) -> np.ndarray:
        return np.array([p.to_unit(values[p.name]) for p in self.params])

    def sample(self, rng: np.random.Generator) -> dict:
        return self.decode(rng.uniform(size=self.dim))


# Search ranges per transform. The AE ranges keep each variant's layer
# inequalities satisfiable (undercomplete: e2 < e1 < 70; overcomplete: 70 < e1 < e2).
def default_space(transform: str, n_feat: int = 70, lr_range: tuple[float, float] = (0.01, 0.1)) -> SearchSpace:
    lr = Param("lr", "logreal", *lr_range)
    bs = Param("bs", "cat", choices=(32, 64))
    if transform == "AER":
        return SearchSpace((Param("e1", "int", 50, 65), Param("e2", "int", 10, 45), lr, bs))
    if transform == "AEA":
        return SearchSpace((Param("e1", "int", 75, 80), Param("e2", "int", 85, 100), lr, bs))
    if transform == "PCA":
        return SearchSpace((Param("n_f", "int", 2, n_feat),))
    raise ValueError(f"transform {transform!r} has no tunable hyperparameters")


@dataclass
class Trial:
    number: int
    params: dict
    J: float
    status: str = "ok"        # "ok" or "failed"
    message: str = ""


# -- GP surrogate --------------------------------------------------------------

def se_kernel(A, B, lengthscales, signal_var):
    A = np.atleast_2d(A) / lengthscales
    B = np.atleast_2d(B) / lengthscales
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))


@dataclass
class GPSurrogate:
    """Zero-mean GP on standardized targets with an ARD squared-exponential kernel."""

    lengthscales: np.ndarray
    signal_var: float = 1.0
    noise_var: float = JITTER
    X: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_mean: float = 0.0
    y_std: float = 1.0
    _chol: tuple | None = None
    _alpha: np.ndarray | None = None

    def condition(self, X, y):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        self.y = (y - self.y_mean) / self.y_std
        K = se_kernel(self.X, self.X, self.lengthscales, self.signal_var)
        K[np.diag_indices_from(K)] += max(self.noise_var, JITTER)
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.y)
        return self

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation in the original target units."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = se_kernel(Xs, self.X, self.lengthscales, self.signal_var)
        mu = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = np.maximum(self.signal_var - np.sum(Ks * v.T, axis=1), 0.0)
        return mu * self.y_std + self.y_mean, np.sqrt(var) * self.y_std

    def log_marginal_likelihood(self) -> float:
        L = self._chol[0]
        return float(-0.5 * self.y @ self._alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(self.y) * np.log(2 * np.pi))


def fit_gp(X, y, fit_noise: bool = True) -> GPSurrogate:
    """Type-II maximum likelihood over log length scales, signal and noise variance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    d = X.shape[1]

    def unpack(theta):
        ls = np.exp(theta[:d])
        sv = np.exp(theta[d])
        nv = np.exp(theta[d + 1]) if fit_noise else JITTER
        return ls, sv, nv

    def nll(theta):
        ls, sv, nv = unpack(theta)
        try:
            gp = GPSurrogate(ls, sv, nv).condition(X, y)
        except np.linalg.LinAlgError:
            return 1e10
        return -gp.log_marginal_likelihood()

    bounds = [(math.log(1e-2), math.log(10.0))] * d + [(math.log(1e-2), math.log(1e2))]
    if fit_noise:
        bounds.append((math.log(1e-8), math.log(1.0)))
    best = None
    # fixed restarts keep the fit deterministic
    for ls0 in (0.1, 0.3, 1.0):
        theta0 = [math.log(ls0)] * d + [0.0] + ([math.log(1e-4)] if fit_noise else [])
        res = minimize(nll, theta0, method="L-BFGS-B", bounds=bounds)
        if best is None or res.fun < best.fun:
            best = res
    ls, sv, nv = unpack(best.x)
    return GPSurrogate(ls, sv, nv).condition(X, y)


def expected_improvement(mu, sigma, best: float) -> np.ndarray:
    """EI for minimization; reduces to max(best - mu, 0) where sigma is 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    imp = best - mu
    out = np.maximum(imp, 0.0)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    out[pos] = imp[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return np.maximum(out, 0.0)


def suggest(surrogate: GPSurrogate | None, space: SearchSpace, rng: np.random.Generator,
            best: float | None = None, n_candidates: int = N_CANDIDATES) -> dict:
    """Next assignment to evaluate. Without a surrogate, a uniform draw from the space."""
    if surrogate is None or best is None:
        return space.sample(rng)
    cand = [space.decode(u) for u in rng.uniform(size=(n_candidates, space.dim))]
    U = np.array([space.encode(c) for c in cand])
    mu, sd = surrogate.predict(U)
    ei = expected_improvement(mu, sd, best)
    return cand[int(np.argmax(ei))]


def optimize(space: SearchSpace, objective: Callable[[dict], float], n_trials: int = 50, seed: int = 0,
             history: list[Trial] | None = None, log=None) -> tuple[Trial, list[Trial]]:
    """Sequential GP-EI search. ``history`` (e.g. from a previous run) is extended in place of a cold start."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trials = list(history or [])
    for _ in range(n_trials):
        # one stream per trial number, so a resumed study matches an uninterrupted one
        rng = np.random.default_rng([seed, len(trials)])
        done = [t for t in trials if t.status == "ok"]
        surrogate = None
        best = None
        if len(done) >= space.dim + 1:
            U = np.array([space.encode(t.params) for t in done])
            J = np.array([t.J for t in done])
            surrogate = fit_gp(U, J)
            best = float(J.min())
        params = suggest(surrogate, space, rng, best)
        number = len(trials)
        try:
            J = float(objective(params))
            if not math.isfinite(J):
                raise FloatingPointError(f"objective returned {J}")
            trial = Trial(number, params, J)
        except Exception as exc:
            trial = Trial(number, params, math.inf, "failed", f"{type(exc).__name__}: {exc}")
        trials.append(trial)
        if log:
            log(trial)
    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise RuntimeError(f"all {len(trials)} trials failed; last error: {trials[-1].message}")
    return min(ok, key=lambda t: (t.J, t.number)), trials


def incumbent_curve(trials: list[Trial]) -> list[float]:
    out, best = [], math.inf
    for t in trials:
        if t.status == "ok":
            best = min(best, t.J)
        out.append(best)
    return out


# -- pipeline objective --------------------------------------------------------

def make_objective(dataset: Dataset, detector: str, transform: str, protocol: EvalProtocol = EvalProtocol(),
                   seed: int = 0, wavelet: WaveletSpec = WaveletSpec(), detector_params: dict | None = None,
                   ae_epochs: int = 100) -> Callable[[dict], float]:
    """Variance of the raw NM on the nominal slice for a transform built from ``params``.

    Features and the normalizer are computed once; the detector seed is fixed
    for the whole study.
    """
    protocol.validate(dataset)
    tr, nom = protocol.train, protocol.nominal
    Ftr = extract_batch(dataset.matrix(tr.set_name), wavelet)[list(tr.indices(len(dataset.sets[tr.set_name])))]
    Fnom = extract_batch(dataset.matrix(nom.set_name), wavelet)[list(nom.indices(len(dataset.sets[nom.set_name])))]
    normalizer = fit_normalizer(Ftr)
    Ztr, Znom = normalize(Ftr, normalizer), normalize(Fnom, normalizer)

    def objective(params: dict) -> float:
        p = dict(params)
        if transform in ("AER", "AEA"):
            p.setdefault("epochs", ae_epochs)
        tm = fit_transform_model(transform, Ztr, p, seed=seed)
        model = fit_detector(detector, apply(tm, Ztr), (detector_params or {}).get(detector), seed=seed)
        return nm_variance(model.score(apply(tm, Znom)))

    return objective


# -- files -------------------------------------------------------------------

def write_history(path, trials: list[Trial], space: SearchSpace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial"] + [f"param:{n}" for n in space.names] + ["J", "status"])
        for t in trials:
            w.writerow([t.number] + [t.params[n] for n in space.names] + [repr(t.J), t.status])


def read_history(path, space: SearchSpace) -> list[Trial]:
    trials = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            params = {}
            for p in space.params:
                raw = d[f"param:{p.name}"]
                if p.kind == "cat":
                    params[p.name] = next(c for c in p.choices if str(c) == raw)
                elif p.kind == "int":
                    params[p.name] = int(raw)
                else:
                    params[p.name] = float(raw)
            trials.append(Trial(int(d["trial"]), params, float(d["J"]), d["status"]))
    return trials


def write_best_params(path, best: dict) -> None:
    """``best`` maps detector -> transform -> params; merged into an existing file."""
    path = Path(path)
    merged = json.loads(path.read_text()) if path.exists() else {}
    for det, per in best.items():
        merged.setdefault(det, {}).update(per)
    path.write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")


def read_best_params(path) -> dict:
    return json.loads(Path(path).read_text())
