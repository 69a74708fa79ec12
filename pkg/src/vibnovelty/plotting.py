"""Figures rendered from the benchmark CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .benchmark import MetricsRow  # noqa: E402

DPI = 120


def _group_traces(traces: list[dict]) -> dict[tuple[str, str], list[dict]]:
    out: dict[tuple[str, str], list[dict]] = {}
    for r in traces:
        out.setdefault((r["detector"], r["transform"]), []).append(r)
    return out


def plot_traces(traces: list[dict], path, column: str = "nm_scaled") -> Path:
    """Grid of NM traces, one row per detector and one column per transform, with set boundaries marked."""
    groups = _group_traces(traces)
    dets = list(dict.fromkeys(d for d, _ in groups))
    trs = list(dict.fromkeys(t for _, t in groups))
    fig, axes = plt.subplots(len(dets), len(trs), figsize=(3.2 * len(trs), 1.8 * len(dets)),
                             sharex=True, squeeze=False)
    for i, d in enumerate(dets):
        for j, t in enumerate(trs):
            ax = axes[i][j]
            rows = groups.get((d, t), [])
            if rows:
                y = np.array([r[column] for r in rows])
                ax.plot(y, lw=0.6)
                sets = [r["set"] for r in rows]
                for k in range(1, len(sets)):
                    if sets[k] != sets[k - 1]:
                        ax.axvline(k, color="0.6", lw=0.5, ls="--")
            if i == 0:
                ax.set_title(t)
            if j == 0:
                ax.set_ylabel(d)
            ax.tick_params(labelsize=7)
    fig.supxlabel("chunk (trace order)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_metric_bars(rows: list[MetricsRow], metric: str, path, log: bool = True) -> Path:
    """Grouped bars of one report column per detector, one bar per transform."""
    dets = list(dict.fromkeys(r.detector for r in rows))
    trs = list(dict.fromkeys(r.transform for r in rows))
    width = 0.8 / max(len(trs), 1)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    x = np.arange(len(dets))
    for j, t in enumerate(trs):
        vals = []
        for d in dets:
            v = next((getattr(r, metric) for r in rows if r.detector == d and r.transform == t), None)
            vals.append(np.nan if v is None else float(v))
        ax.bar(x + (j - (len(trs) - 1) / 2) * width, vals, width, label=t)
    ax.set_xticks(x)
    ax.set_xticklabels(dets)
    ax.set_ylabel(metric)
    if log:
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_scatter(rows: list[MetricsRow], x: str, y: str, path, logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    for d in dict.fromkeys(r.detector for r in rows):
        pts = [(getattr(r, x), getattr(r, y)) for r in rows if r.detector == d]
        pts = [(a, b) for a, b in pts if a is not None and b is not None]
        if pts:
            a, b = zip(*pts)
            ax.scatter(a, b, label=d, s=18)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if logy:
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def render_all(rows: list[MetricsRow], traces: list[dict], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in rows if not r.flags.startswith("error")]
    paths = []
    if traces:
        paths.append(plot_traces(traces, out / "traces.png"))
    if ok:
        paths.append(plot_metric_bars(ok, "variance_scaled", out / "variance.png"))
        paths.append(plot_metric_bars(ok, "reactivity", out / "reactivity.png", log=False))
        paths.append(plot_metric_bars(ok, "infer_us_mean", out / "inference_time.png"))
        paths.append(plot_scatter(ok, "n_f", "infer_us_mean", out / "time_vs_nf.png", logy=True))
        paths.append(plot_scatter(ok, "fp_pct", "reactivity", out / "fp_vs_reactivity.png"))
    return paths
