from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NMScaler:
    """Min-max map of novelty metrics onto [0, 1] over a reference run.

    Values outside the fitted range are not clamped; they extrapolate linearly.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"NM scaler needs max > min, got [{self.lo}, {self.hi}]")

    def __call__(self, nm):
        return (np.asarray(nm, dtype=float) - self.lo) / (self.hi - self.lo)

    def outside(self, nm) -> np.ndarray:
        nm = np.asarray(nm, dtype=float)
        return (nm < self.lo) | (nm > self.hi)


def fit_nm_scaler(scores) -> NMScaler:
    s = np.asarray(scores, dtype=float)
    s = s[np.isfinite(s)]
    if np.unique(s).size < 2:
        raise ValueError("NM scaler needs at least 2 distinct finite scores")
    return NMScaler(float(s.min()), float(s.max()))


def scale(s: NMScaler, nm):
    out = s(nm)
    return float(out) if np.ndim(out) == 0 else out
