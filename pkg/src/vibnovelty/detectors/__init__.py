"""Six unsupervised novelty detectors sharing one calling convention.

Every fitted model exposes ``score(V)`` returning one novelty metric per row
(higher means more novel) and round-trips through :func:`save_detector` /
:func:`load_detector`.
"""

from __future__ import annotations

from .. import persist
from .dbscan import DBSCANModel, fit_dbscan, nm_dbscan
from .gmm import GMMModel, fit_gmm, nm_gmm
from .iforest import IForestModel, c_factor, fit_iforest, nm_iforest
from .kmeans import KMeansModel, fit_kmeans, nm_kmeans, silhouette
from .lof import LOFModel, fit_lof, nm_lof
from .ocsvm import OCSVMModel, fit_ocsvm, nm_ocsvm
from .scaler import NMScaler, fit_nm_scaler, scale

# display names follow the study's table labels
DETECTORS = {
    "kmeans": ("KMeans", fit_kmeans, KMeansModel),
    "dbscan": ("DBSCAN", fit_dbscan, DBSCANModel),
    "gmm": ("GMM", fit_gmm, GMMModel),
    "nusvm": ("nuSVM", fit_ocsvm, OCSVMModel),
    "iforest": ("IForest", fit_iforest, IForestModel),
    "lof": ("LOF", fit_lof, LOFModel),
}

_BY_KIND = {cls.kind: cls for _, _, cls in DETECTORS.values()}


def fit_detector(name: str, X, params: dict | None = None, seed: int = 0):
    if name not in DETECTORS:
        raise ValueError(f"unknown detector {name!r}; expected one of {list(DETECTORS)}")
    params = dict(params or {})
    for key in ("k_range",):
        if key in params and not isinstance(params[key], range):
            lo, hi = params[key]
            params[key] = range(int(lo), int(hi) + 1)
    return DETECTORS[name][1](X, seed=seed, **params)


def save_detector(model, path) -> None:
    params, arrays = model.to_record()
    persist.save(path, f"detector:{model.kind}", params, arrays)


def load_detector(path):
    kind, params, arrays = persist.load(path)
    tag = kind.split(":", 1)[1] if kind.startswith("detector:") else None
    if tag not in _BY_KIND:
        raise persist.ModelFileError(f"{path}: not a detector model ({kind!r})")
    return _BY_KIND[tag].from_record(params, arrays)


def save_scaler(s: NMScaler, path) -> None:
    persist.save(path, "scaler:minmax", {"min": s.lo, "max": s.hi}, {})


def load_scaler(path) -> NMScaler:
    kind, params, _ = persist.load(path)
    if kind != "scaler:minmax":
        raise persist.ModelFileError(f"{path}: not an NM scaler ({kind!r})")
    return NMScaler(float(params["min"]), float(params["max"]))


__all__ = [
    "DETECTORS", "fit_detector", "save_detector", "load_detector", "save_scaler", "load_scaler",
    "KMeansModel", "DBSCANModel", "GMMModel", "OCSVMModel", "IForestModel", "LOFModel", "NMScaler",
    "fit_kmeans", "fit_dbscan", "fit_gmm", "fit_ocsvm", "fit_iforest", "fit_lof", "fit_nm_scaler",
    "nm_kmeans", "nm_dbscan", "nm_gmm", "nm_ocsvm", "nm_iforest", "nm_lof", "silhouette", "scale", "c_factor",
]
