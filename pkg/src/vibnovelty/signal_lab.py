"""Synthetic shaker dataset: harmonic synthesis, P2P scaling, chunking and a text file format.

The two drive signals are sums of sines over the same nine frequencies with
different weights. Each set of the default study is one signal played at one
peak-to-peak amplitude for 206 s, sampled at 1666 Hz and cut into 1 s chunks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FS_DEFAULT = 1666.0
FREQS = (50.0, 100.0, 150.0, 230.0, 300.0, 440.0, 460.0, 530.0, 600.0)
V1_WEIGHTS = (0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5)
V2_WEIGHTS = (0.5, 0.5, 0.5, 1.0, 0.2, 1.0, 0.5, 0.5, 2.0)

# Default sensor noise of the study datasets. Noiseless chunks are exact
# repeats of one 1 s period, so without noise the nominal spread is pure
# floating-point roundoff.
DEFAULT_NOISE_SIGMA = 0.01

FILE_MAGIC = "# vibnovelty-dataset v1"


class DatasetParseError(ValueError):
    """Malformed dataset file. Carries the 1-based line number and offending field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class HarmonicSpec:
    weights: tuple[float, ...]
    frequencies: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        if len(self.weights) != len(self.frequencies):
            raise ValueError("weights and frequencies must have equal length")
        if not self.weights:
            raise ValueError("at least one harmonic is required")
        if any(f <= 0 for f in self.frequencies):
            raise ValueError("harmonic frequencies must be strictly positive")


SIGNALS = {
    "v1": HarmonicSpec(V1_WEIGHTS, FREQS),
    "v2": HarmonicSpec(V2_WEIGHTS, FREQS),
}


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if s.size < 2:
            raise ValueError("a time series needs at least 2 samples")

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    __hash__ = None


@dataclass(frozen=True)
class DatasetSpec:
    set_name: str
    signal_type: str
    target_p2p: float
    duration: float = 206.0
    chunk_len: float = 1.0
    noise_sigma: float = 0.0
    fs: float = FS_DEFAULT

    def __post_init__(self):
        if self.signal_type not in SIGNALS:
            raise ValueError(f"unknown signal type {self.signal_type!r}; expected one of {sorted(SIGNALS)}")
        if self.target_p2p <= 0:
            raise ValueError("target_p2p must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        n_chunks = self.duration / self.chunk_len
        if self.chunk_len <= 0 or abs(n_chunks - round(n_chunks)) > 1e-9 or round(n_chunks) < 1:
            raise ValueError("duration must divide into an integer number of chunks")


@dataclass
class Dataset:
    sets: dict[str, list[TimeSeries]] = field(default_factory=dict)
    specs: dict[str, DatasetSpec] = field(default_factory=dict)

    def __post_init__(self):
        for name, chunks in self.sets.items():
            if len({(len(c), c.sample_rate) for c in chunks}) > 1:
                raise ValueError(f"set {name!r} mixes chunk lengths or sample rates")

    def matrix(self, set_name: str) -> np.ndarray:
        """Chunks of one set stacked into an (n_chunks, n_samples) array."""
        return np.vstack([c.samples for c in self.sets[set_name]])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if list(self.sets) != list(other.sets) or self.specs != other.specs:
            return False
        return all(
            len(self.sets[k]) == len(other.sets[k])
            and all(a == b for a, b in zip(self.sets[k], other.sets[k]))
            for k in self.sets
        )


def default_specs(noise_sigma: float = DEFAULT_NOISE_SIGMA) -> list[DatasetSpec]:
    """The eight sets of the shaker study: v1 at five amplitudes, v2 at three."""
    v1 = [0.25, 0.50, 0.75, 1.00, 1.25]
    v2 = [0.50, 0.75, 1.00]
    specs = [DatasetSpec(f"set{i + 1}", "v1", p, noise_sigma=noise_sigma) for i, p in enumerate(v1)]
    specs += [DatasetSpec(f"set{i + 6}", "v2", p, noise_sigma=noise_sigma) for i, p in enumerate(v2)]
    return specs


def synth_signal(spec: HarmonicSpec, duration: float, fs: float) -> TimeSeries:
    """Sample ``sum_i w_i sin(2 pi f_i k / fs)`` for k = 0 .. duration*fs - 1."""
    fmax = max(spec.frequencies)
    if not fs > 2.0 * fmax:
        raise ValueError(
            f"sampling rate {fs} Hz violates Nyquist for a {fmax} Hz harmonic (need fs > {2 * fmax} Hz)"
        )
    n = int(round(duration * fs))
    k = np.arange(n, dtype=float)
    out = np.zeros(n)
    for w, f in zip(spec.weights, spec.frequencies):
        out += w * np.sin(2.0 * np.pi * f * k / fs)
    return TimeSeries(out, fs)


def scale_to_p2p(ts: TimeSeries, target_p2p: float) -> TimeSeries:
    x = ts.samples
    p2p = float(x.max() - x.min())
    if not p2p > 0:
        raise ValueError("cannot scale a constant signal to a peak-to-peak target")
    return TimeSeries(x * (target_p2p / p2p), ts.sample_rate)


def chunk(ts: TimeSeries, chunk_len: float) -> list[TimeSeries]:
    """Split into consecutive chunks of ``chunk_len`` seconds; the remainder is dropped."""
    width = chunk_len * ts.sample_rate
    m = int(round(width))
    if m < 1 or abs(width - m) > 1e-9:
        raise ValueError(f"chunk_len * fs = {width} is not a positive integer sample count")
    count = len(ts) // m
    if count == 0:
        raise ValueError(f"chunk of {m} samples is longer than the {len(ts)}-sample signal")
    return [TimeSeries(ts.samples[i * m:(i + 1) * m].copy(), ts.sample_rate) for i in range(count)]


def _substream(seed: int, set_name: str) -> np.random.Generator:
    # per-set noise stream, independent of set order
    digest = hashlib.sha256(set_name.encode()).digest()
    return np.random.default_rng([int(seed), int.from_bytes(digest[:8], "little")])


def generate_set(spec: DatasetSpec, seed: int = 0) -> list[TimeSeries]:
    clean = synth_signal(SIGNALS[spec.signal_type], spec.duration, spec.fs)
    # gain is fixed by the clean drive signal; sensor noise is added afterwards
    scaled = scale_to_p2p(clean, spec.target_p2p)
    if spec.noise_sigma > 0:
        noise = _substream(seed, spec.set_name).normal(0.0, spec.noise_sigma, len(scaled))
        scaled = TimeSeries(scaled.samples + noise, scaled.sample_rate)
    return chunk(scaled, spec.chunk_len)


def generate_dataset(specs: list[DatasetSpec], seed: int = 0) -> Dataset:
    if not specs:
        raise ValueError("at least one dataset spec is required")
    names = [s.set_name for s in specs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate set names: {', '.join(dupes)}")
    ds = Dataset()
    for spec in specs:
        ds.sets[spec.set_name] = generate_set(spec, seed)
        ds.specs[spec.set_name] = spec
    return ds


# -- file format -------------------------------------------------------------
#
#   # vibnovelty-dataset v1
#   set,<name>,<signal_type>,<p2p>,<fs>,<chunk_len>
#   meta,<name>,<duration>,<noise_sigma>
#   <s0>,<s1>,...            one chunk per line
#   end,<n_sets>,<n_chunks>


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, path) -> None:
    lines = [FILE_MAGIC]
    n_chunks = 0
    for name, chunks in ds.sets.items():
        spec = ds.specs.get(name)
        if spec is None:
            fs = chunks[0].sample_rate if chunks else FS_DEFAULT
            clen = len(chunks[0]) / fs if chunks else 1.0
            spec = DatasetSpec(name, "v1", 1.0, duration=clen * max(len(chunks), 1), chunk_len=clen, fs=fs)
        lines.append(f"set,{name},{spec.signal_type},{_fmt(spec.target_p2p)},{_fmt(spec.fs)},{_fmt(spec.chunk_len)}")
        lines.append(f"meta,{name},{_fmt(spec.duration)},{_fmt(spec.noise_sigma)}")
        for c in chunks:
            lines.append(",".join(_fmt(v) for v in c.samples))
            n_chunks += 1
    lines.append(f"end,{len(ds.sets)},{n_chunks}")
    Path(path).write_text("\n".join(lines) + "\n")


def _float(tok: str, line: int, name: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise DatasetParseError(f"not a number: {tok!r}", line, name) from None


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != FILE_MAGIC:
        raise DatasetParseError(f"missing header {FILE_MAGIC!r}", 1, "magic")

    ds = Dataset()
    current = None
    header: dict = {}
    ended = False
    total = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if ended:
            raise DatasetParseError("content after end record", lineno)
        tag = line.split(",", 1)[0]
        if tag == "set":
            parts = line.split(",")
            if len(parts) != 6:
                raise DatasetParseError(f"set record needs 6 fields, got {len(parts)}", lineno, "set")
            _, name, sig, p2p, fs, clen = parts
            if name in ds.sets:
                raise DatasetParseError(f"duplicate set {name!r}", lineno, "name")
            current = name
            header[name] = (sig, _float(p2p, lineno, "p2p"), _float(fs, lineno, "fs"), _float(clen, lineno, "chunk_len"))
            ds.sets[name] = []
        elif tag == "meta":
            parts = line.split(",")
            if len(parts) != 4 or parts[1] != current:
                raise DatasetParseError("meta record must follow its set record", lineno, "meta")
            sig, p2p, fs, clen = header[current]
            try:
                ds.specs[current] = DatasetSpec(
                    current, sig, p2p,
                    duration=_float(parts[2], lineno, "duration"),
                    chunk_len=clen,
                    noise_sigma=_float(parts[3], lineno, "noise_sigma"),
                    fs=fs,
                )
            except ValueError as exc:
                if isinstance(exc, DatasetParseError):
                    raise
                raise DatasetParseError(str(exc), lineno, "set") from None
        elif tag == "end":
            parts = line.split(",")
            if len(parts) != 3:
                raise DatasetParseError("end record needs 3 fields", lineno, "end")
            n_sets, n_chunks = int(_float(parts[1], lineno, "n_sets")), int(_float(parts[2], lineno, "n_chunks"))
            if n_sets != len(ds.sets) or n_chunks != total:
                raise DatasetParseError(
                    f"end record announces {n_sets} sets / {n_chunks} chunks, file holds {len(ds.sets)} / {total}",
                    lineno, "end",
                )
            ended = True
        else:
            if current is None or current not in ds.specs:
                raise DatasetParseError("chunk record before any set/meta record", lineno)
            toks = line.split(",")
            try:
                values = np.array([float(t) for t in toks])
            except ValueError:
                bad = next(i for i, t in enumerate(toks) if not _is_float(t))
                raise DatasetParseError(f"not a number: {toks[bad]!r}", lineno, f"sample[{bad}]") from None
            spec = ds.specs[current]
            expected = int(round(spec.chunk_len * spec.fs))
            if values.size != expected:
                raise DatasetParseError(
                    f"chunk has {values.size} samples, expected {expected}", lineno, "samples"
                )
            ds.sets[current].append(TimeSeries(values, spec.fs))
            total += 1
    if not ended:
        raise DatasetParseError("file truncated: no end record", len(lines), "end")
    return ds


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def set_summary(ds: Dataset) -> list[tuple[str, str, float, int, float]]:
    """(name, signal, p2p, n_chunks, measured p2p of the first chunk) per set."""
    rows = []
    for name, chunks in ds.sets.items():
        spec = ds.specs[name]
        measured = float(np.ptp(chunks[0].samples)) if chunks else math.nan
        rows.append((name, spec.signal_type, spec.target_p2p, len(chunks), measured))
    return rows
