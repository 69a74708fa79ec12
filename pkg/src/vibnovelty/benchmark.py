"""Evaluation protocol: every (detector x transform) pair, scored over all sets.

Per combination: fit the normalizer and transform on the training slice, fit the
detector on the transformed training rows, score every remaining chunk, fit a
min-max NM scaler on that full trace, then compute the report metrics.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .detectors import DETECTORS, fit_detector, fit_nm_scaler, save_detector, save_scaler
from .features import Normalizer, WaveletSpec, extract_batch, fit_normalizer, normalize
from .persist import save as save_blocks
from .signal_lab import Dataset
from .transform import TRANSFORMS, apply, fit_transform_model, save_transform

REPORT_COLUMNS = [
    "detector", "transform", "n_f", "fp_pct", "variance_scaled", "variance_raw", "mean_nominal",
    "mean_novel", "reactivity", "infer_us_mean", "infer_us_median", "flags",
]
TIMING_COLUMNS = ("infer_us_mean", "infer_us_median")
TRACE_COLUMNS = ["set", "chunk", "detector", "transform", "nm_raw", "nm_scaled"]

# Tuned transform settings per detector from the reference study; used when no
# tuned-params file is supplied.
REFERENCE_TUNED = {
    "kmeans": {"AEA": dict(e1=80, e2=85, lr=0.08, bs=64), "AER": dict(e1=61, e2=32, lr=0.03, bs=64), "PCA": dict(n_f=3)},
    "dbscan": {"AEA": dict(e1=75, e2=85, lr=0.20, bs=32), "AER": dict(e1=56, e2=10, lr=0.08, bs=64), "PCA": dict(n_f=2)},
    "gmm": {"AEA": dict(e1=79, e2=85, lr=0.08, bs=32), "AER": dict(e1=61, e2=10, lr=0.01, bs=64), "PCA": dict(n_f=2)},
    "nusvm": {"AEA": dict(e1=80, e2=93, lr=0.09, bs=32), "AER": dict(e1=65, e2=10, lr=0.10, bs=64), "PCA": dict(n_f=2)},
    "iforest": {"AEA": dict(e1=79, e2=85, lr=0.02, bs=64), "AER": dict(e1=50, e2=45, lr=0.03, bs=64), "PCA": dict(n_f=70)},
    "lof": {"AEA": dict(e1=79, e2=88, lr=0.03, bs=32), "AER": dict(e1=50, e2=10, lr=0.01, bs=32), "PCA": dict(n_f=3)},
}


@dataclass(frozen=True)
class Slice:
    set_name: str
    start: int = 0
    stop: int | None = None

    def indices(self, n: int) -> range:
        stop = n if self.stop is None else min(self.stop, n)
        return range(self.start, stop)


@dataclass(frozen=True)
class EvalProtocol:
    train: Slice = Slice("set1", 0, 100)
    nominal: Slice = Slice("set1", 100, None)
    novelty: Slice | None = Slice("set5")
    trace_sets: tuple[str, ...] | None = None   # None: every set in dataset order

    def validate(self, ds: Dataset):
        for sl in (self.train, self.nominal, self.novelty):
            if sl is not None and sl.set_name not in ds.sets:
                raise ValueError(f"protocol references missing set {sl.set_name!r}")
        for name in self.trace_sets or ():
            if name not in ds.sets:
                raise ValueError(f"trace order references missing set {name!r}")
        if self.train.set_name == self.nominal.set_name:
            n = len(ds.sets[self.train.set_name])
            if set(self.train.indices(n)) & set(self.nominal.indices(n)):
                raise ValueError("training and nominal-evaluation slices overlap")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsRow:
    detector: str
    transform: str
    n_f: int | None = None
    fp_pct: float = math.nan
    variance_scaled: float = math.nan
    variance_raw: float = math.nan
    mean_nominal: float = math.nan
    mean_novel: float | None = math.nan
    reactivity: float | None = math.nan
    infer_us_mean: float = math.nan
    infer_us_median: float = math.nan
    flags: str = ""
    infer_e2e_us_mean: float = math.nan

    def csv_row(self) -> list[str]:
        return [_cell(getattr(self, c)) for c in REPORT_COLUMNS]


@dataclass
class Trace:
    detector: str
    transform: str
    sets: list[str]
    chunks: np.ndarray
    nm_raw: np.ndarray
    nm_scaled: np.ndarray


@dataclass
class BenchmarkResult:
    rows: list[MetricsRow]
    traces: list[Trace]
    provenance: dict = field(default_factory=dict)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


# -- metrics -----------------------------------------------------------------

def nm_variance(scores) -> float:
    s = np.asarray(scores, dtype=float)
    if s.size < 2:
        raise ValueError("variance needs at least 2 scores")
    return float(np.mean((s - s.mean()) ** 2))


def reactivity(nominal_scores, novel_scores) -> float:
    """Mean novel NM minus mean nominal NM; positive when novelties score higher."""
    a = np.asarray(nominal_scores, dtype=float)
    b = np.asarray(novel_scores, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("reactivity needs nonempty nominal and novel score sets")
    return float(b.mean() - a.mean())


def feature_percentage(n_f: int, n_feat: int) -> float:
    if n_feat <= 0:
        raise ValueError("n_feat must be positive")
    return 100.0 * n_f / n_feat


def measure_inference(detector, transform, samples, reps: int = 1, min_evals: int = 1000) -> dict:
    """Per-sample wall time of the NM computation alone (latents are precomputed).

    One warm-up pass, then ``reps * max(min_evals, len(samples))`` single-sample
    evaluations cycling through ``samples``. Returns mean and median in seconds.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    Z = apply(transform, X) if transform is not None else X
    rows = [Z[i:i + 1] for i in range(len(Z))]
    for r in rows:
        detector.score(r)
    total = reps * max(min_evals, len(rows))
    times = np.empty(total)
    clock = time.perf_counter_ns
    for i in range(total):
        r = rows[i % len(rows)]
        t0 = clock()
        detector.score(r)
        times[i] = clock() - t0
    # a zero reading only means the clock tick is coarser than the call
    times = np.maximum(times, 1.0) * 1e-9
    return {"mean": float(times.mean()), "median": float(np.median(times)), "evals": int(total)}


def measure_end_to_end(detector, transform, normalizer, spec, chunks, evals: int = 100) -> float:
    """Mean seconds per chunk for extraction + normalization + transform + NM."""
    chunks = np.atleast_2d(chunks)
    clock = time.perf_counter_ns
    t = []
    for i in range(evals):
        c = chunks[i % len(chunks)][None, :]
        t0 = clock()
        detector.score(apply(transform, normalize(extract_batch(c, spec), normalizer)))
        t.append(clock() - t0)
    return float(np.mean(t)) * 1e-9


# -- driver ------------------------------------------------------------------

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def default_combos(detectors=None, transforms=None) -> list[tuple[str, str]]:
    dets = list(detectors or DETECTORS)
    trs = list(transforms or TRANSFORMS)
    return [(d, t) for d in dets for t in trs]


def transform_params(detector: str, transform: str, tuned: dict | None = None) -> dict:
    tuned = tuned or {}
    if transform == "OF":
        return {}
    if detector in tuned and transform in tuned[detector]:
        return dict(tuned[detector][transform])
    return dict(REFERENCE_TUNED.get(detector, REFERENCE_TUNED["kmeans"])[transform])


def run_benchmark(dataset: Dataset, protocol: EvalProtocol = EvalProtocol(), combos=None, seed: int = 0,
                  wavelet: WaveletSpec = WaveletSpec(), tuned: dict | None = None,
                  detector_params: dict | None = None, ae_epochs: int = 100, min_evals: int = 1000,
                  e2e_evals: int = 100, models_dir=None, log=None) -> BenchmarkResult:
    protocol.validate(dataset)
    combos = list(combos or default_combos())
    detector_params = detector_params or {}

    feats = {name: extract_batch(dataset.matrix(name), wavelet) if dataset.sets[name] else None
             for name in dataset.sets}
    n_feat = wavelet.n_features
    tr_set = protocol.train.set_name
    tr_idx = list(protocol.train.indices(len(dataset.sets[tr_set])))
    normalizer = fit_normalizer(feats[tr_set][tr_idx])

    order = list(protocol.trace_sets or dataset.sets)
    trace_sets, trace_chunks, trace_rows = [], [], []
    skip = set(tr_idx)
    for name in order:
        if feats[name] is None:
            continue
        idx = [i for i in range(len(feats[name])) if not (name == tr_set and i in skip)]
        trace_sets += [name] * len(idx)
        trace_chunks += idx
        trace_rows.append(feats[name][idx])
    Ztrace = normalize(np.vstack(trace_rows), normalizer)
    Ztrain = normalize(feats[tr_set][tr_idx], normalizer)
    trace_sets_arr = np.array(trace_sets)
    trace_chunks_arr = np.array(trace_chunks)

    def positions(sl: Slice | None):
        if sl is None:
            return None
        wanted = set(sl.indices(len(dataset.sets[sl.set_name])))
        pos = np.flatnonzero((trace_sets_arr == sl.set_name) & np.isin(trace_chunks_arr, list(wanted)))
        return pos if pos.size else None

    nominal_pos = positions(protocol.nominal)
    novel_pos = positions(protocol.novelty)
    if nominal_pos is None or len(nominal_pos) < 2:
        raise ValueError("nominal-evaluation slice must contain at least 2 chunks outside the training slice")
    raw_train_chunks = dataset.matrix(tr_set)[tr_idx]

    rows: list[MetricsRow] = []
    traces: list[Trace] = []
    for det, tr in combos:
        row = MetricsRow(DETECTORS[det][0], tr)
        if log:
            log(f"{det}/{tr}")
        try:
            tparams = transform_params(det, tr, tuned)
            if tr in ("AER", "AEA"):
                tparams.setdefault("epochs", ae_epochs)
            tm = fit_transform_model(tr, Ztrain, tparams, seed=seed)
            Ltrain = apply(tm, Ztrain)
            model = fit_detector(det, Ltrain, detector_params.get(det), seed=seed)
            raw = model.score(apply(tm, Ztrace))
            if not np.all(np.isfinite(raw)):
                raise FloatingPointError("non-finite novelty metric in trace")
            scaler = fit_nm_scaler(raw)
            scaled = scaler(raw)
            row.n_f = tm.n_f
            row.fp_pct = feature_percentage(tm.n_f, n_feat)
            row.variance_scaled = nm_variance(scaled[nominal_pos])
            row.variance_raw = nm_variance(raw[nominal_pos])
            row.mean_nominal = float(scaled[nominal_pos].mean())
            flags = []
            if novel_pos is not None:
                row.mean_novel = float(scaled[novel_pos].mean())
                row.reactivity = reactivity(scaled[nominal_pos], scaled[novel_pos])
            else:
                row.mean_novel = None
                row.reactivity = None
                flags.append("no-novelty-slice")
            if scaler.outside(raw).any():
                flags.append("extrapolated")
            timing = measure_inference(model, None, Ltrain, min_evals=min_evals)
            row.infer_us_mean = timing["mean"] * 1e6
            row.infer_us_median = timing["median"] * 1e6
            if e2e_evals:
                row.infer_e2e_us_mean = measure_end_to_end(model, tm, normalizer, wavelet, raw_train_chunks,
                                                           e2e_evals) * 1e6
            row.flags = ";".join(flags)
            traces.append(Trace(row.detector, tr, trace_sets, trace_chunks_arr, raw, scaled))
            if models_dir is not None:
                _save_combo(Path(models_dir) / f"{det}_{tr}", normalizer, tm, model, scaler, wavelet)
        except Exception as exc:  # one failed combination must not abort the others
            row.flags = f"error:{type(exc).__name__}:{exc}".replace("\n", " ")
        rows.append(row)

    provenance = {
        "seed": seed,
        "protocol": protocol.to_dict(),
        "wavelet": asdict(wavelet),
        "combos": [list(c) for c in combos],
        "tuned": tuned or REFERENCE_TUNED,
        "detector_params": detector_params,
        "ae_epochs": ae_epochs,
        "n_trace": len(trace_sets),
    }
    provenance["config_hash"] = config_hash(provenance)
    provenance["versions"] = versions()
    return BenchmarkResult(rows, traces, provenance)


def versions() -> dict:
    import scipy
    return {"vibnovelty": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _save_combo(d: Path, normalizer: Normalizer, tm, model, scaler, wavelet: WaveletSpec):
    d.mkdir(parents=True, exist_ok=True)
    save_blocks(d / "normalizer.txt", "normalizer:zscore",
                {"family": wavelet.family, "levels": wavelet.levels, "boundary_mode": wavelet.boundary_mode},
                {"mean": normalizer.mean, "std": normalizer.std})
    save_transform(tm, d / "transform.txt")
    save_detector(model, d / "detector.txt")
    save_scaler(scaler, d / "scaler.txt")


# -- export ------------------------------------------------------------------

def export_report(result: BenchmarkResult, out_dir) -> dict[str, Path]:
    if not result.rows:
        raise ValueError("no rows to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report_csv": out / "report.csv", "traces_csv": out / "traces.csv", "report_json": out / "report.json"}
    with open(paths["report_csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in result.rows:
            w.writerow(r.csv_row())
    with open(paths["traces_csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in result.traces:
            for s, c, a, b in zip(t.sets, t.chunks, t.nm_raw, t.nm_scaled):
                w.writerow([s, int(c), t.detector, t.transform, repr(float(a)), repr(float(b))])
    doc = {
        "columns": REPORT_COLUMNS,
        "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(r).items()}
                 for r in result.rows],
        "provenance": result.provenance,
    }
    paths["report_json"].write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return paths


def _parse_cell(col: str, s: str):
    if col in ("detector", "transform", "flags"):
        return s
    if s == "":
        return None
    if col == "n_f":
        return int(s)
    return float(s)


def read_report_csv(path) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected report header {header}")
        return [MetricsRow(**{c: _parse_cell(c, v) for c, v in zip(header, line)}) for line in r]


def read_traces_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"set": d["set"], "chunk": int(d["chunk"]), "detector": d["detector"], "transform": d["transform"],
             "nm_raw": float(d["nm_raw"]), "nm_scaled": float(d["nm_scaled"])}
            for d in csv.DictReader(fh)
        ]


def strip_timing(report_csv_text: str) -> str:
    """Report text with the timing columns blanked, for determinism comparisons."""
    lines = report_csv_text.splitlines()
    rows = list(csv.reader(lines))
    drop = [rows[0].index(c) for c in TIMING_COLUMNS]
    return "\n".join(",".join(v for i, v in enumerate(r) if i not in drop) for r in rows)
