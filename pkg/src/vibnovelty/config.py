"""Run configuration: an INI file merged with command-line overrides."""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

from .benchmark import EvalProtocol, Slice
from .detectors import DETECTORS
from .features import WaveletSpec
from .signal_lab import DEFAULT_NOISE_SIGMA, DatasetSpec, default_specs
from .transform import TRANSFORMS


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    out: Path = Path("out")
    dataset: Path | None = None           # existing dataset file; generated under out/ when None
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    sets: list[str] | None = None          # None: all default sets
    wavelet: WaveletSpec = field(default_factory=WaveletSpec)
    protocol: EvalProtocol = field(default_factory=EvalProtocol)
    detectors: list[str] = field(default_factory=lambda: list(DETECTORS))
    transforms: list[str] = field(default_factory=lambda: list(TRANSFORMS))
    detector_params: dict = field(default_factory=dict)
    tuned: Path | None = None             # best-params JSON
    trials: int = 50
    ae_epochs: int = 100
    min_evals: int = 1000
    e2e_evals: int = 100

    def dataset_path(self) -> Path:
        return self.dataset if self.dataset is not None else self.out / "dataset.txt"

    def specs(self) -> list[DatasetSpec]:
        specs = default_specs(self.noise_sigma)
        if self.sets is None:
            return specs
        by_name = {s.set_name: s for s in specs}
        missing = [s for s in self.sets if s not in by_name]
        if missing:
            raise ConfigError(f"unknown set(s) {missing}; available: {list(by_name)}")
        return [by_name[s] for s in self.sets]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "out": str(self.out), "dataset": str(self.dataset) if self.dataset else None,
            "noise_sigma": self.noise_sigma, "sets": self.sets,
            "wavelet": {"family": self.wavelet.family, "levels": self.wavelet.levels},
            "protocol": self.protocol.to_dict(), "detectors": self.detectors, "transforms": self.transforms,
            "detector_params": self.detector_params, "tuned": str(self.tuned) if self.tuned else None,
            "trials": self.trials, "ae_epochs": self.ae_epochs,
        }


def parse_sets(text: str) -> list[str]:
    """``"1,5"`` or ``"set1,set5"`` -> ``["set1", "set5"]``."""
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        out.append(f"set{tok}" if tok.isdigit() else tok)
    if not out:
        raise ConfigError("empty set list")
    return out


def parse_names(text: str, allowed, what: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    lookup = {a.lower(): a for a in allowed}
    out = []
    for n in names:
        if n.lower() not in lookup:
            raise ConfigError(f"unknown {what} {n!r}; choose from {list(allowed)}")
        out.append(lookup[n.lower()])
    if not out:
        raise ConfigError(f"empty {what} list")
    return out


def _slice(text: str) -> Slice | None:
    """``set1:0:100`` / ``set5`` / ``none``."""
    text = text.strip()
    if text.lower() in ("", "none"):
        return None
    parts = text.split(":")
    try:
        start = int(parts[1]) if len(parts) > 1 and parts[1] else 0
        stop = int(parts[2]) if len(parts) > 2 and parts[2] else None
    except ValueError as exc:
        raise ConfigError(f"bad slice {text!r}: {exc}") from None
    return Slice(parts[0], start, stop)


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = RunConfig()
    try:
        if cp.has_section("run"):
            r = cp["run"]
            cfg.seed = r.getint("seed", cfg.seed)
            cfg.out = Path(r.get("out", str(cfg.out)))
            cfg.trials = r.getint("trials", cfg.trials)
            cfg.ae_epochs = r.getint("ae_epochs", cfg.ae_epochs)
            cfg.min_evals = r.getint("min_evals", cfg.min_evals)
            cfg.e2e_evals = r.getint("e2e_evals", cfg.e2e_evals)
            if "detectors" in r:
                cfg.detectors = parse_names(r["detectors"], DETECTORS, "detector")
            if "transforms" in r:
                cfg.transforms = parse_names(r["transforms"], TRANSFORMS, "transform")
            if r.get("tuned"):
                cfg.tuned = Path(r["tuned"])
        if cp.has_section("dataset"):
            d = cp["dataset"]
            if d.get("path"):
                cfg.dataset = Path(d["path"])
            cfg.noise_sigma = d.getfloat("noise_sigma", cfg.noise_sigma)
            if d.get("sets"):
                cfg.sets = parse_sets(d["sets"])
        if cp.has_section("wavelet"):
            w = cp["wavelet"]
            cfg.wavelet = WaveletSpec(w.get("family", cfg.wavelet.family), w.getint("levels", cfg.wavelet.levels))
        if cp.has_section("protocol"):
            p = cp["protocol"]
            base = EvalProtocol()
            train = _slice(p["train"]) if "train" in p else base.train
            nominal = _slice(p["nominal"]) if "nominal" in p else base.nominal
            if train is None or nominal is None:
                raise ConfigError("train and nominal slices are required")
            novelty = _slice(p["novelty"]) if "novelty" in p else base.novelty
            trace = tuple(parse_sets(p["trace_sets"])) if p.get("trace_sets") else None
            cfg.protocol = EvalProtocol(train, nominal, novelty, trace)
        for sec in cp.sections():
            if sec.startswith("detector."):
                name = sec.split(".", 1)[1].lower()
                if name not in DETECTORS:
                    raise ConfigError(f"unknown detector section [{sec}]")
                cfg.detector_params[name] = {k: _value(v) for k, v in cp[sec].items()}
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def write_config(cfg: RunConfig, path) -> None:
    """Write ``cfg`` as INI; ``load_config`` reads it back to an equal configuration."""
    cp = configparser.ConfigParser()
    cp["run"] = {
        "seed": str(cfg.seed), "out": str(cfg.out), "trials": str(cfg.trials), "ae_epochs": str(cfg.ae_epochs),
        "min_evals": str(cfg.min_evals), "e2e_evals": str(cfg.e2e_evals),
        "detectors": ",".join(cfg.detectors), "transforms": ",".join(cfg.transforms),
        "tuned": str(cfg.tuned) if cfg.tuned else "",
    }
    cp["dataset"] = {"path": str(cfg.dataset) if cfg.dataset else "", "noise_sigma": repr(cfg.noise_sigma),
                     "sets": ",".join(cfg.sets) if cfg.sets else ""}
    cp["wavelet"] = {"family": cfg.wavelet.family, "levels": str(cfg.wavelet.levels)}

    def fmt(sl):
        if sl is None:
            return "none"
        return f"{sl.set_name}:{sl.start}:{'' if sl.stop is None else sl.stop}"

    pr = cfg.protocol
    cp["protocol"] = {"train": fmt(pr.train), "nominal": fmt(pr.nominal), "novelty": fmt(pr.novelty),
                      "trace_sets": ",".join(pr.trace_sets) if pr.trace_sets else ""}
    for name, params in cfg.detector_params.items():
        cp[f"detector.{name}"] = {k: json.dumps(v) for k, v in params.items()}
    with open(path, "w") as fh:
        cp.write(fh)
