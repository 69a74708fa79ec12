"""Feature transformations: identity (OF), PCA, and under-/overcomplete autoencoders."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import persist

LEAKY_SLOPE = 0.01


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"autoencoder training diverged at epoch {epoch} (loss={loss})")


# -- PCA ---------------------------------------------------------------------

@dataclass(frozen=True)
class PCAModel:
    components: np.ndarray        # (n_f, n_feat), orthonormal rows
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    @property
    def n_f(self) -> int:
        return self.components.shape[0]


def fit_pca(X, target: int | float) -> PCAModel:
    """Principal components of ``X``.

    An ``int`` target is a component count; a ``float`` in (0, 1] is the
    variance ratio to preserve, and the smallest count reaching it is kept.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs at least 2 rows")
    n_feat = X.shape[1]
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if not total > 0:
        raise ValueError("degenerate data: all rows identical, no principal directions")
    ratio = var / total
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)])
    vt = vt * flip[:, None]

    if isinstance(target, (bool, np.bool_)):
        raise TypeError("PCA target must be an int count or a float ratio")
    if isinstance(target, (int, np.integer)):
        if not 1 <= target <= n_feat:
            raise ValueError(f"component count must be in [1, {n_feat}], got {target}")
        k = int(target)
    else:
        if not 0 < target <= 1:
            raise ValueError(f"variance ratio must be in (0, 1], got {target}")
        cum = np.cumsum(ratio)
        k = int(np.searchsorted(cum, target - 1e-12) + 1)
    if k > vt.shape[0]:
        # more components requested than samples: complete the basis
        q, _ = np.linalg.qr(np.vstack([vt, np.eye(n_feat)]).T)
        extra = q.T[vt.shape[0]:k]
        vt = np.vstack([vt, extra])
        ratio = np.concatenate([ratio, np.zeros(k - ratio.size)])
    return PCAModel(vt[:k].copy(), ratio[:k].copy(), mean)


def pca_transform(m: PCAModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != m.mean.size:
        raise ValueError(f"input dimension {v.shape[-1]} does not match PCA input {m.mean.size}")
    return (v - m.mean) @ m.components.T


def pca_inverse(m: PCAModel, h) -> np.ndarray:
    return np.asarray(h, dtype=float) @ m.components + m.mean


# -- autoencoder -------------------------------------------------------------

def relu(z):
    return np.maximum(z, 0.0)


def leaky_relu(z, slope=LEAKY_SLOPE):
    return np.where(z > 0, z, slope * z)


_ACT = {"relu": relu, "leaky_relu": leaky_relu}
_DACT = {
    "relu": lambda z: (z > 0).astype(float),
    "leaky_relu": lambda z: np.where(z > 0, 1.0, LEAKY_SLOPE),
}
ACTIVATIONS = ("relu", "leaky_relu", "relu", "leaky_relu")


@dataclass
class AEModel:
    """Four dense layers: n_feat -> e1 -> e2 (latent) -> d1 -> n_feat."""

    weights: list[np.ndarray]     # weights[i] has shape (fan_in, fan_out)
    biases: list[np.ndarray]
    variant: str                  # "AER" or "AEA"
    lr: float = 0.01
    bs: int = 32
    epochs: int = 100
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    loss_history: list[float] = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_f(self) -> int:
        return self.sizes[2]


def check_arch(n_feat: int, e1: int, e2: int, d1: int) -> str:
    """Variant tag implied by the layer widths; raises if neither inequality chain holds."""
    if e2 < e1 < n_feat and e2 < d1 < n_feat:
        return "AER"
    if n_feat < e1 < e2 and n_feat < d1 < e2:
        return "AEA"
    raise ValueError(
        f"layer widths {n_feat}->{e1}->{e2}->{d1}->{n_feat} are neither undercomplete "
        "(e2 < e1, d1 < n_feat) nor overcomplete (n_feat < e1, d1 < e2)"
    )


def init_autoencoder(n_feat: int, e1: int, e2: int, d1: int, seed: int = 0, variant: str | None = None) -> AEModel:
    tag = check_arch(n_feat, e1, e2, d1)
    if variant is not None and variant != tag:
        raise ValueError(f"widths describe an {tag} network, not {variant}")
    rng = np.random.default_rng(seed)
    sizes = [n_feat, e1, e2, d1, n_feat]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return AEModel(weights, biases, tag)


def _forward(weights, biases, X, upto=4):
    acts = [X]
    pre = []
    a = X
    for i in range(upto):
        z = a @ weights[i] + biases[i]
        a = _ACT[ACTIVATIONS[i]](z)
        pre.append(z)
        acts.append(a)
    return pre, acts


def reconstruct(m: AEModel, X) -> np.ndarray:
    return _forward(m.weights, m.biases, np.atleast_2d(np.asarray(X, dtype=float)))[1][-1]


def mse(m: AEModel, X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = reconstruct(m, X)
    return float(np.mean((r - X) ** 2))


def loss_and_grads(weights, biases, X):
    """MSE over all entries of the batch and its gradient w.r.t. every weight and bias."""
    pre, acts = _forward(weights, biases, X)
    diff = acts[-1] - X
    loss = float(np.mean(diff ** 2))
    delta = 2.0 * diff / diff.size
    gw = [None] * 4
    gb = [None] * 4
    for i in reversed(range(4)):
        delta = delta * _DACT[ACTIVATIONS[i]](pre[i])
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        delta = delta @ weights[i].T
    return loss, gw, gb


def fit_autoencoder(X, arch: dict, lr: float = 0.01, bs: int = 32, epochs: int = 100, seed: int = 0,
                    variant: str | None = None) -> AEModel:
    """Mini-batch SGD on the reconstruction MSE; shuffles every epoch from ``seed``.

    ``arch`` holds ``e1``, ``e2`` and optionally ``d1`` (defaults to ``e1``).
    """
    X = np.asarray(X, dtype=float)
    n, n_feat = X.shape
    e1, e2 = int(arch["e1"]), int(arch["e2"])
    d1 = int(arch.get("d1", e1))
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not 1 <= bs <= n:
        raise ValueError(f"batch size {bs} must be in [1, {n}]")
    m = init_autoencoder(n_feat, e1, e2, d1, seed=seed, variant=variant)
    m.lr, m.bs, m.epochs = float(lr), int(bs), int(epochs)
    rng = np.random.default_rng([seed, 1])
    m.initial_loss = mse(m, X)
    history = [m.initial_loss]
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, bs):
                batch = X[order[start:start + bs]]
                _, gw, gb = loss_and_grads(m.weights, m.biases, batch)
                for i in range(4):
                    m.weights[i] -= lr * gw[i]
                    m.biases[i] -= lr * gb[i]
            loss = mse(m, X)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            history.append(loss)
    m.final_loss = history[-1]
    m.loss_history = history
    return m


def encode(m: AEModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != m.sizes[0]:
        raise ValueError(f"input dimension {v.shape[-1]} does not match encoder input {m.sizes[0]}")
    a = v
    for i in range(2):
        a = _ACT[ACTIVATIONS[i]](a @ m.weights[i] + m.biases[i])
    return a


# -- dispatch ----------------------------------------------------------------

TRANSFORMS = ("OF", "AER", "AEA", "PCA")


@dataclass
class TransformModel:
    kind: str                     # one of TRANSFORMS
    n_feat: int
    model: PCAModel | AEModel | None = None

    @property
    def n_f(self) -> int:
        if self.kind == "OF":
            return self.n_feat
        return self.model.n_f


def fit_transform_model(kind: str, X, params: dict | None = None, seed: int = 0) -> TransformModel:
    """Fit a transform of the given kind on normalized training features."""
    params = dict(params or {})
    X = np.asarray(X, dtype=float)
    n_feat = X.shape[1]
    if kind == "OF":
        return TransformModel("OF", n_feat)
    if kind == "PCA":
        target = params.get("n_f", params.get("ratio", 0.95))
        return TransformModel("PCA", n_feat, fit_pca(X, target))
    if kind in ("AER", "AEA"):
        arch = {"e1": params["e1"], "e2": params["e2"], "d1": params.get("d1", params["e1"])}
        m = fit_autoencoder(X, arch, lr=params.get("lr", 0.01), bs=min(int(params.get("bs", 32)), X.shape[0]),
                            epochs=int(params.get("epochs", 100)), seed=seed, variant=kind)
        return TransformModel(kind, n_feat, m)
    raise ValueError(f"unknown transform {kind!r}; expected one of {TRANSFORMS}")


def apply(t: TransformModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != t.n_feat:
        raise ValueError(f"input dimension {v.shape[-1]} does not match transform input {t.n_feat}")
    if t.kind == "OF":
        return v
    if t.kind == "PCA":
        return pca_transform(t.model, v)
    return encode(t.model, v)


def save_transform(t: TransformModel, path) -> None:
    params = {"n_feat": t.n_feat}
    arrays: dict[str, np.ndarray] = {}
    if t.kind == "PCA":
        arrays = {"components": t.model.components, "explained_variance_ratio": t.model.explained_variance_ratio,
                  "mean": t.model.mean}
    elif t.kind in ("AER", "AEA"):
        m = t.model
        params.update(lr=m.lr, bs=m.bs, epochs=m.epochs, initial_loss=m.initial_loss, final_loss=m.final_loss)
        for i, (w, b) in enumerate(zip(m.weights, m.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
    persist.save(path, f"transform:{t.kind}", params, arrays)


def load_transform(path) -> TransformModel:
    kind, params, arrays = persist.load(path)
    if not kind.startswith("transform:"):
        raise persist.ModelFileError(f"{path}: expected a transform model, found {kind!r}")
    tag = kind.split(":", 1)[1]
    n_feat = int(params["n_feat"])
    if tag == "OF":
        return TransformModel("OF", n_feat)
    if tag == "PCA":
        return TransformModel("PCA", n_feat, PCAModel(arrays["components"], arrays["explained_variance_ratio"],
                                                      arrays["mean"]))
    if tag in ("AER", "AEA"):
        m = AEModel([arrays[f"W{i}"] for i in range(4)], [arrays[f"b{i}"] for i in range(4)], tag,
                    lr=params["lr"], bs=params["bs"], epochs=params["epochs"],
                    initial_loss=params["initial_loss"], final_loss=params["final_loss"])
        return TransformModel(tag, n_feat, m)
    raise persist.ModelFileError(f"{path}: unknown transform kind {tag!r}")
