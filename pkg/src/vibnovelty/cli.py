"""Command-line driver: generate -> extract -> tune -> benchmark -> report, plus score.

Exit codes: 0 success, 2 configuration or input error, 3 execution failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import export_report, read_report_csv, read_traces_csv, run_benchmark
from .config import ConfigError, RunConfig, load_config, parse_names, parse_sets
from .detectors import DETECTORS, load_detector, load_scaler
from .features import Normalizer, WaveletSpec, extract_batch, normalize, read_feature_matrix, write_feature_matrix
from .hyperopt import default_space, make_objective, optimize, read_best_params, read_history
from .hyperopt import write_best_params, write_history
from .persist import ModelFileError
from .persist import load as load_blocks
from .signal_lab import DatasetParseError, Dataset, generate_dataset, load_dataset, save_dataset, set_summary
from .transform import TRANSFORMS, apply, load_transform

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 2, 3
MANIFEST = "manifest.json"

log = logging.getLogger("vibnovelty")


class InputError(Exception):
    """Bad configuration or input; maps to exit code 2."""


class ExecutionError(Exception):
    """Pipeline failure after inputs were accepted; maps to exit code 3."""


# -- helpers -------------------------------------------------------------------

def build_config(args) -> RunConfig:
    """Config file first, then any flag the user actually passed."""
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = Path(args.out)
        if args.dataset is not None:
            cfg.dataset = Path(args.dataset)
        if args.noise_sigma is not None:
            if args.noise_sigma < 0:
                raise ConfigError("--noise-sigma must be >= 0")
            cfg.noise_sigma = args.noise_sigma
        if args.sets is not None:
            cfg.sets = parse_sets(args.sets)
        if args.detectors is not None:
            cfg.detectors = parse_names(args.detectors, DETECTORS, "detector")
        if args.transforms is not None:
            cfg.transforms = parse_names(args.transforms, TRANSFORMS, "transform")
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            cfg.trials = args.trials
        if args.levels is not None or args.wavelet is not None:
            cfg.wavelet = WaveletSpec(args.wavelet or cfg.wavelet.family,
                                      cfg.wavelet.levels if args.levels is None else args.levels)
        if args.tuned is not None:
            cfg.tuned = Path(args.tuned)
        if args.epochs is not None:
            cfg.ae_epochs = args.epochs
        if args.min_evals is not None:
            cfg.min_evals = args.min_evals
    except (ConfigError, ValueError) as exc:
        raise InputError(str(exc)) from None
    return cfg


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out: Path) -> Path:
    """List every file under ``out`` with its size and sha256."""
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != MANIFEST)
    doc = {"version": __version__,
           "artifacts": [{"path": p.relative_to(out).as_posix(), "bytes": p.stat().st_size, "sha256": sha256(p)}
                         for p in files]}
    path = out / MANIFEST
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def require_dataset(cfg: RunConfig) -> Dataset:
    path = cfg.dataset_path()
    if not path.exists():
        raise InputError(f"dataset {path} not found; run 'generate' first or pass --dataset")
    try:
        ds = load_dataset(path)
    except DatasetParseError as exc:
        raise InputError(f"{path}: {exc}") from None
    if cfg.sets is not None:
        missing = [s for s in cfg.sets if s not in ds.sets]
        if missing:
            raise InputError(f"dataset {path} has no set(s) {missing}")
        ds = Dataset({s: ds.sets[s] for s in cfg.sets}, {s: ds.specs[s] for s in cfg.sets if s in ds.specs})
    return ds


def load_tuned(cfg: RunConfig) -> dict | None:
    if cfg.tuned is None:
        return None
    if not cfg.tuned.exists():
        raise InputError(f"tuned-params file {cfg.tuned} not found")
    try:
        return read_best_params(cfg.tuned)
    except json.JSONDecodeError as exc:
        raise InputError(f"{cfg.tuned}: {exc}") from None


# -- commands ------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> int:
    specs = cfg.specs()
    ds = generate_dataset(specs, seed=cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.dataset_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, path)
    print("set,signal,p2p,chunks,measured_p2p")
    for name, sig, p2p, n, measured in set_summary(ds):
        print(f"{name},{sig},{p2p},{n},{measured:.6f}")
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    ds = require_dataset(cfg)
    out = cfg.out / "features"
    out.mkdir(parents=True, exist_ok=True)
    for name in ds.sets:
        try:
            F = extract_batch(ds.matrix(name), cfg.wavelet) if ds.sets[name] else np.zeros((0, cfg.wavelet.n_features))
        except ValueError as exc:
            raise InputError(f"set {name}: {exc}") from None
        write_feature_matrix(out / f"{name}.csv", F, cfg.wavelet.levels)
        print(f"{name},{F.shape[0]},{F.shape[1]}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig, resume: bool = False) -> int:
    ds = require_dataset(cfg)
    try:
        cfg.protocol.validate(ds)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = cfg.out / "tuning"
    out.mkdir(parents=True, exist_ok=True)
    best_all: dict = {}
    for det in cfg.detectors:
        for tr in cfg.transforms:
            if tr == "OF":
                continue
            space = default_space(tr, cfg.wavelet.n_features)
            hist_path = out / f"{det}_{tr}_history.csv"
            history = read_history(hist_path, space) if resume and hist_path.exists() else None
            objective = make_objective(ds, det, tr, cfg.protocol, seed=cfg.seed, wavelet=cfg.wavelet,
                                       detector_params=cfg.detector_params, ae_epochs=cfg.ae_epochs)
            try:
                best, trials = optimize(space, objective, n_trials=cfg.trials, seed=cfg.seed, history=history,
                                        log=lambda t: log.info("%s/%s trial %d J=%s %s", det, tr, t.number, t.J,
                                                               t.status))
            except RuntimeError as exc:
                write_history(hist_path, [], space)
                raise ExecutionError(f"{det}/{tr}: {exc}") from None
            write_history(hist_path, trials, space)
            params = dict(best.params)
            if tr in ("AER", "AEA"):
                params["d1"] = params["e1"]
            best_all.setdefault(det, {})[tr] = params
            print(f"{det},{tr},{best.number},{best.J!r},{json.dumps(params, sort_keys=True)}")
    if best_all:
        write_best_params(out / "best_params.json", best_all)
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    ds = require_dataset(cfg)
    tuned = load_tuned(cfg)
    try:
        cfg.protocol.validate(ds)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    combos = [(d, t) for d in cfg.detectors for t in cfg.transforms]
    try:
        result = run_benchmark(ds, cfg.protocol, combos, seed=cfg.seed, wavelet=cfg.wavelet, tuned=tuned,
                               detector_params=cfg.detector_params, ae_epochs=cfg.ae_epochs,
                               min_evals=cfg.min_evals, e2e_evals=cfg.e2e_evals,
                               models_dir=cfg.out / "models", log=log.info)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    export_report(result, cfg.out)
    failed = [r for r in result.rows if r.flags.startswith("error")]
    for r in failed:
        log.warning("%s/%s failed: %s", r.detector, r.transform, r.flags)
    print(f"{len(result.rows)} rows, {len(failed)} failed, report in {cfg.out / 'report.csv'}")
    if len(failed) == len(result.rows):
        raise ExecutionError("every combination failed")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    from .plotting import render_all

    rpath, tpath = cfg.out / "report.csv", cfg.out / "traces.csv"
    if not rpath.exists():
        raise InputError(f"{rpath} not found; run 'benchmark' first")
    try:
        rows = read_report_csv(rpath)
        traces = read_traces_csv(tpath) if tpath.exists() else []
    except (ValueError, KeyError) as exc:
        raise InputError(f"malformed report: {exc}") from None
    print(f"{'detector':8} {'transform':9} {'n_f':>4} {'FP%':>7} {'variance':>10} {'reactivity':>10} {'t_us':>9}")
    for r in rows:
        react = "" if r.reactivity is None else f"{r.reactivity:.4f}"
        n_f = "" if r.n_f is None else r.n_f
        print(f"{r.detector:8} {r.transform:9} {n_f!s:>4} {r.fp_pct:7.2f} {r.variance_scaled:10.3e} "
              f"{react:>10} {r.infer_us_mean:9.1f}")
    for p in render_all(rows, traces, cfg.out / "figures"):
        log.info("wrote %s", p)
    return EXIT_OK


def _model_dir(cfg: RunConfig, args) -> Path:
    if args.models:
        return Path(args.models)
    det = parse_names(args.detector, DETECTORS, "detector")[0]
    tr = parse_names(args.transform, TRANSFORMS, "transform")[0]
    return cfg.out / "models" / f"{det}_{tr}"


def _read_score_input(path: Path, cfg: RunConfig, wavelet: WaveletSpec) -> np.ndarray:
    """Feature rows from either a dataset file or a feature CSV."""
    if not path.exists():
        raise InputError(f"input {path} not found")
    text = path.read_text()
    if not text.strip():
        return np.zeros((0, wavelet.n_features))
    try:
        if text.startswith("#"):
            ds = load_dataset(path)
            names = cfg.sets or list(ds.sets)
            missing = [s for s in names if s not in ds.sets]
            if missing:
                raise InputError(f"input has no set(s) {missing}")
            mats = [extract_batch(ds.matrix(s), wavelet) for s in names if ds.sets[s]]
            return np.vstack(mats) if mats else np.zeros((0, wavelet.n_features))
        _, F = read_feature_matrix(path)
        return F
    except (DatasetParseError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_score(cfg: RunConfig, args) -> int:
    try:
        mdir = _model_dir(cfg, args)
    except ConfigError as exc:
        raise InputError(str(exc)) from None
    try:
        _, nparams, narrays = load_blocks(mdir / "normalizer.txt")
        normalizer = Normalizer(narrays["mean"], narrays["std"])
        wavelet = WaveletSpec(nparams["family"], int(nparams["levels"]))
        tm = load_transform(mdir / "transform.txt")
        model = load_detector(mdir / "detector.txt")
        scaler = load_scaler(mdir / "scaler.txt")
    except (OSError, ModelFileError, KeyError) as exc:
        raise InputError(f"cannot load models from {mdir}: {exc}") from None
    F = _read_score_input(Path(args.input), cfg, wavelet)
    print("chunk,nm_raw,nm_scaled")
    if len(F) == 0:
        return EXIT_OK
    try:
        raw = model.score(apply(tm, normalize(F, normalizer)))
    except ValueError as exc:
        raise InputError(f"dimension mismatch: {exc}") from None
    for i, (a, b) in enumerate(zip(raw, scaler(raw))):
        print(f"{i},{float(a)!r},{float(b)!r}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI run configuration; flags given here override it")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--dataset", help="dataset file (default <out>/dataset.txt)")
    p.add_argument("--sets", help="comma-separated set names or numbers, e.g. '1,5' or 'set1,set5'")
    p.add_argument("--detectors", help=f"comma-separated subset of {','.join(DETECTORS)}")
    p.add_argument("--transforms", help=f"comma-separated subset of {','.join(TRANSFORMS)}")
    p.add_argument("--trials", type=int, help="tuning trials per combination (default 50)")
    p.add_argument("--noise-sigma", type=float, help="additive noise std for generated sets (default 0.01)")
    p.add_argument("--wavelet", help="Daubechies family, e.g. db4 (default)")
    p.add_argument("--levels", type=int, help="WPD depth (default 6 -> 70 features)")
    p.add_argument("--tuned", help="best-params JSON from 'tune' used for transform hyperparameters")
    p.add_argument("--epochs", type=int, help="autoencoder training epochs (default 100)")
    p.add_argument("--min-evals", type=int, help="minimum single-sample evaluations for timing (default 1000)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibnovelty", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "synthesize the shaker dataset",
        "extract": "write per-set feature matrices to <out>/features",
        "tune": "Bayesian optimization of transform hyperparameters",
        "benchmark": "run every detector x transform pair and write report.csv, traces.csv, report.json",
        "score": "score chunks with persisted models; prints chunk,nm_raw,nm_scaled",
        "report": "print the report table and render figures to <out>/figures",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "tune":
            p.add_argument("--resume", action="store_true", help="continue from existing history files")
        if name == "score":
            p.add_argument("input", help="dataset file or feature CSV to score")
            p.add_argument("--detector", default="kmeans", help="detector whose models to use (default kmeans)")
            p.add_argument("--transform", default="OF", help="transform whose models to use (default OF)")
            p.add_argument("--models", help="explicit model directory (overrides --detector/--transform)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        if args.command == "generate":
            code = cmd_generate(cfg)
        elif args.command == "extract":
            code = cmd_extract(cfg)
        elif args.command == "tune":
            code = cmd_tune(cfg, resume=args.resume)
        elif args.command == "benchmark":
            code = cmd_benchmark(cfg)
        elif args.command == "report":
            code = cmd_report(cfg)
        else:
            code = cmd_score(cfg, args)
        if args.command != "score":
            write_manifest(cfg.out)
        return code
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExecutionError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # unexpected failure during execution
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
