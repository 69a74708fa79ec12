"""Acceptance criteria 1-12.

Each test records one ``PASS``/``FAIL`` line, printed in the terminal summary
(and immediately when run as ``python3 tests/test_acceptance.py``).
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from test_detectors import grid_qp, lof_oracle, silhouette_oracle
from vibnovelty.benchmark import REPORT_COLUMNS, read_report_csv, read_traces_csv, strip_timing
from vibnovelty.cli import main
from vibnovelty.detectors import DETECTORS
from vibnovelty.detectors.dbscan import fit_dbscan, nm_dbscan
from vibnovelty.detectors.gmm import em
from vibnovelty.detectors.kmeans import KMeansModel, nm_kmeans, silhouette_samples
from vibnovelty.detectors.lof import fit_lof, nm_lof
from vibnovelty.detectors.ocsvm import rbf_kernel, smo_one_class
from vibnovelty.features import WaveletSpec, extract, wpd_norms
from vibnovelty.hyperopt import Param, SearchSpace, incumbent_curve, optimize
from vibnovelty.signal_lab import default_specs, generate_dataset
from vibnovelty.benchmark import EvalProtocol, run_benchmark
from vibnovelty.transform import init_autoencoder, loss_and_grads

NAMES = {"kmeans": "KMeans", "dbscan": "DBSCAN", "gmm": "GMM", "nusvm": "nuSVM", "iforest": "IForest", "lof": "LOF"}


def record(n: int, title: str, ok: bool, detail: str = ""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Two full CLI pipeline runs with the same seed and config."""
    out = []
    for tag in ("a", "b"):
        d = tmp_path_factory.mktemp(f"run_{tag}")
        assert main(["generate", "--out", str(d), "--seed", "0"]) == 0
        t0 = time.perf_counter()
        assert main(["benchmark", "--out", str(d), "--seed", "0"]) == 0
        out.append((d, time.perf_counter() - t0))
    return out


def test_c01_feature_count():
    x = np.random.default_rng(0).normal(size=1666)
    t0 = time.perf_counter()
    f = extract(x, WaveletSpec("db4", 6))
    dt = time.perf_counter() - t0
    record(1, "L=6 extraction yields 70 features", f.shape == (70,) and dt < 1.0, f"n={f.size}, {dt:.3f}s")


def test_c02_parseval():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=1666)
        for L in range(1, 7):
            n = wpd_norms(x, WaveletSpec("db4", L))
            worst = max(worst, abs(np.sum(n ** 2) - x @ x) / (x @ x))
    dt = time.perf_counter() - t0
    record(2, "WPD Parseval on 100 chunks, depths 1-6", worst <= 1e-9 and dt < 5.0, f"max rel err {worst:.2e}, {dt:.2f}s")


def test_c03_kmeans_trichotomy():
    m = KMeansModel(np.array([[0.0, 0.0], [10.0, 0.0]]), np.array([2.0, 0.5]), 2, 1.0)
    got = [nm_kmeans(m, [0.0, 0.0]), nm_kmeans(m, [2.0, 0.0]), nm_kmeans(m, [0.0, 4.0]),
           nm_kmeans(m, [10.0, 0.0]), nm_kmeans(m, [10.5, 0.0]), nm_kmeans(m, [11.0, 0.0])]
    record(3, "KMeans NM is -1 / 0 / +1 at centroid / radius / 2r", got == [-1.0, 0.0, 1.0, -1.0, 0.0, 1.0], str(got))


def test_c04_dbscan_linearity():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5], [0.5, 0.0]])
    m = fit_dbscan(pts, eps=0.75, min_pts=3)
    errs = [abs(nm_dbscan(m, [1.0 + k * 0.75, 1.0]) - k) for k in (0.5, 1.0, 2.0, 3.0, 7.25)]
    errs += [abs(nm_dbscan(m, [-k * 0.75 * 0.6, -k * 0.75 * 0.8]) - k) for k in (1.0, 4.0)]
    record(4, "DBSCAN NM at m*eps equals m", max(errs) <= 1e-12, f"max err {max(errs):.1e}")


def test_c05_oracles():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    X = rng.normal(size=(100, 3))
    labels = rng.integers(0, 4, 100)
    e_sil = np.abs(silhouette_samples(X, labels) - silhouette_oracle(X, labels)).max()
    P = rng.normal(size=(100, 2))
    m = fit_lof(P, k=20)
    e_lof = max(abs(nm_lof(m, q) - lof_oracle(P, 20, q)) for q in rng.normal(size=(5, 2)) * 2)
    X4 = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 1.1], [2.0, 2.0]])
    Q = rbf_kernel(X4, X4, 0.5)
    alpha, *_ = smo_one_class(Q, 0.5, tol=1e-10)
    val, ref = grid_qp(Q, 0.5)
    e_svm = max(abs(0.5 * alpha @ Q @ alpha - val), np.abs(alpha - ref).max())
    dt = time.perf_counter() - t0
    ok = e_sil <= 1e-9 and e_lof <= 1e-9 and e_svm <= 1e-3 and dt < 30
    record(5, "silhouette, LOF and OCSVM dual match brute-force oracles", ok,
           f"sil {e_sil:.1e}, lof {e_lof:.1e}, svm {e_svm:.1e}, {dt:.1f}s")


def test_c06_em_monotone():
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(20):
        r = np.random.default_rng(100 + s)
        X = np.vstack([r.normal(0, 1, (40, 3)), r.normal(4, 0.5, (40, 3))])
        *_, hist = em(X, 1 + s % 4, seed=s)
        worst = min(worst, float(np.min(np.diff(hist), initial=0.0)))
    dt = time.perf_counter() - t0
    record(6, "EM log-likelihood nondecreasing over 20 fits", worst >= -1e-9 and dt < 30,
           f"min step {worst:.1e}, {dt:.1f}s")


def test_c07_gradient_check():
    t0 = time.perf_counter()
    X = np.random.default_rng(7).normal(size=(5, 6))
    m = init_autoencoder(6, 5, 3, 5, seed=3)
    W = [w.copy() for w in m.weights]
    B = [b.copy() for b in m.biases]
    _, gw, gb = loss_and_grads(W, B, X)
    h, worst = 1e-6, 0.0
    for params, grads in ((W, gw), (B, gb)):
        for p, g in zip(params, grads):
            fd = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                lp = loss_and_grads(W, B, X)[0]
                p[idx] = old - h
                lm = loss_and_grads(W, B, X)[0]
                p[idx] = old
                fd[idx] = (lp - lm) / (2 * h)
            worst = max(worst, np.linalg.norm(fd - g) / max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12))
    dt = time.perf_counter() - t0
    record(7, "autoencoder gradients match finite differences", worst < 1e-4 and dt < 10,
           f"max rel err {worst:.1e}, {dt:.2f}s")


def test_c08_benchmark_shape(runs):
    d, dt = runs[0]
    rows = read_report_csv(d / "report.csv")
    traces = read_traces_csv(d / "traces.csv")
    lengths = {}
    for t in traces:
        key = (t["detector"], t["transform"])
        lengths[key] = lengths.get(key, 0) + 1
    populated = all(getattr(r, c) not in (None, "") and not (isinstance(getattr(r, c), float)
                    and np.isnan(getattr(r, c))) for r in rows for c in REPORT_COLUMNS if c != "flags")
    ok = len(rows) == 24 and populated and set(lengths.values()) == {1548} and dt < 600
    record(8, "default benchmark emits 24 populated rows and 1548-chunk traces", ok,
           f"rows {len(rows)}, trace lengths {sorted(set(lengths.values()))}, {dt:.1f}s")


def test_c09_trend_noiseless():
    t0 = time.perf_counter()
    ds = generate_dataset(default_specs(noise_sigma=0.0), seed=0)
    res = run_benchmark(ds, EvalProtocol(), combos=[(k, "OF") for k in DETECTORS], seed=0, min_evals=10, e2e_evals=1)
    failures = []
    for t in res.traces:
        med = {s: float(np.median(t.nm_scaled[np.array(t.sets) == s])) for s in ds.sets}
        if t.detector == "nuSVM":
            low = min(med[s] for s in ds.sets if s != "set1")
            if not low > 0.9:
                failures.append(f"nuSVM min novel median {low:.3f}")
        elif t.detector in ("KMeans", "DBSCAN", "GMM", "LOF"):
            seq = [med[f"set{i}"] for i in range(1, 6)]
            if not all(b > a for a, b in zip(seq, seq[1:])):
                failures.append(f"{t.detector} not increasing {np.round(seq, 4).tolist()}")
            if not all(med[f"set{i}"] > med["set2"] for i in (6, 7, 8)):
                failures.append(f"{t.detector} sets 6-8 not above set2")
    dt = time.perf_counter() - t0
    record(9, "noiseless OF medians rise with amplitude and nuSVM saturates", not failures and dt < 600,
           "; ".join(failures) or f"{dt:.1f}s")


def test_c10_reactivity(runs):
    rows = [r for r in read_report_csv(runs[0][0] / "report.csv") if r.transform == "OF"]
    worst = min(rows, key=lambda r: r.reactivity)
    record(10, "every detector with OF has reactivity > 0.5", len(rows) == 6 and worst.reactivity > 0.5,
           f"min {worst.detector} {worst.reactivity:.3f}")


def test_c11_hyperopt_toy():
    t0 = time.perf_counter()
    space = SearchSpace((Param("x", "real", -2.0, 3.0),))
    errs, monotone = [], True
    for seed in range(5):
        best, hist = optimize(space, lambda p: (p["x"] - 0.7) ** 2, n_trials=30, seed=seed)
        errs.append(abs(best.params["x"] - 0.7) / 5.0)
        curve = incumbent_curve(hist)
        monotone &= all(b <= a for a, b in zip(curve, curve[1:]))
    dt = time.perf_counter() - t0
    record(11, "optimizer finds the toy minimum within 5% of the domain", max(errs) <= 0.05 and monotone and dt < 60,
           f"worst {100 * max(errs):.2f}% of width, {dt:.1f}s")


def test_c12_determinism(runs):
    (a, ta), (b, tb) = runs
    same_report = strip_timing((a / "report.csv").read_text()) == strip_timing((b / "report.csv").read_text())
    same_traces = (a / "traces.csv").read_bytes() == (b / "traces.csv").read_bytes()
    same_data = (a / "dataset.txt").read_bytes() == (b / "dataset.txt").read_bytes()
    ok = same_report and same_traces and same_data and ta + tb < 1200
    record(12, "two identical runs give byte-identical outputs apart from timing", ok,
           f"report {same_report}, traces {same_traces}, dataset {same_data}, {ta + tb:.1f}s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider", "--rootdir", str(Path(__file__).parent)]))
