import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibnovelty.signal_lab import (
    FREQS, SIGNALS, V1_WEIGHTS, Dataset, DatasetParseError, DatasetSpec, HarmonicSpec, TimeSeries, chunk,
    default_specs, generate_dataset, load_dataset, save_dataset, scale_to_p2p, set_summary, synth_signal,
)


def test_harmonic_spec_validation():
    with pytest.raises(ValueError):
        HarmonicSpec((1.0,), (10.0, 20.0))
    with pytest.raises(ValueError):
        HarmonicSpec((1.0,), (-5.0,))
    with pytest.raises(ValueError):
        HarmonicSpec((), ())


def test_timeseries_invariants():
    with pytest.raises(ValueError):
        TimeSeries(np.array([1.0]), 10.0)
    with pytest.raises(ValueError):
        TimeSeries(np.array([1.0, 2.0]), 0.0)


def test_synth_starts_at_zero():
    ts = synth_signal(SIGNALS["v1"], 1.0, 1666.0)
    assert ts.samples[0] == 0.0
    assert len(ts) == 1666


def test_quarter_period_cycle():
    ts = synth_signal(HarmonicSpec((1.0,), (100.0,)), 0.08, 400.0)
    np.testing.assert_allclose(ts.samples[:8], [0, 1, 0, -1, 0, 1, 0, -1], atol=1e-12)


def test_nyquist_rejected():
    with pytest.raises(ValueError, match="Nyquist"):
        synth_signal(SIGNALS["v1"], 1.0, 1000.0)


@pytest.mark.parametrize("sig", ["v1", "v2"])
def test_dft_peaks_match_frequencies(sig):
    # DFT oracle: strongest bin in a window around each tone sits on the tone
    ts = synth_signal(SIGNALS[sig], 1.0, 1666.0)
    mag = np.abs(np.fft.rfft(ts.samples))
    freqs = np.fft.rfftfreq(1666, 1 / 1666.0)
    for f in FREQS:
        band = (freqs > f - 8) & (freqs < f + 8)
        peak = freqs[band][np.argmax(mag[band])]
        assert abs(peak - f) <= 1.0
    top9 = np.sort(freqs[np.argsort(mag)[-9:]])
    np.testing.assert_allclose(top9, FREQS, atol=1.0)


def test_scale_examples():
    t = np.arange(400) / 400.0
    ts = TimeSeries(np.sin(2 * np.pi * 4 * t), 400.0)
    half = scale_to_p2p(ts, float(np.ptp(ts.samples)) / 2)
    np.testing.assert_allclose(half.samples, ts.samples / 2, rtol=1e-12)
    same = scale_to_p2p(ts, float(np.ptp(ts.samples)))
    np.testing.assert_allclose(same.samples, ts.samples, rtol=1e-12)
    v1 = scale_to_p2p(synth_signal(SIGNALS["v1"], 1.0, 1666.0), 0.25)
    assert abs(np.ptp(v1.samples) - 0.25) <= 1e-9 * 0.25


def test_scale_constant_rejected():
    with pytest.raises(ValueError):
        scale_to_p2p(TimeSeries(np.ones(5), 10.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.01, 100.0), b=st.floats(0.01, 100.0))
def test_scaling_composes(a, b):
    ts = synth_signal(SIGNALS["v2"], 0.2, 1666.0)
    twice = scale_to_p2p(scale_to_p2p(ts, a), b)
    once = scale_to_p2p(ts, b)
    np.testing.assert_allclose(twice.samples, once.samples, rtol=1e-9, atol=1e-12 * b)


def test_chunk_examples():
    ts = TimeSeries(np.arange(10.0), 5.0)
    assert [len(c) for c in chunk(ts, 1.0)] == [5, 5]
    ts11 = TimeSeries(np.arange(11.0), 5.0)
    parts = chunk(ts11, 1.0)
    assert len(parts) == 2 and parts[-1].samples[-1] == 9.0
    with pytest.raises(ValueError):
        chunk(ts, 3.0)


def test_default_dataset_shape(study_dataset):
    assert list(study_dataset.sets) == [f"set{i}" for i in range(1, 9)]
    assert all(len(c) == 206 for c in study_dataset.sets.values())
    assert all(len(c[0]) == 1666 for c in study_dataset.sets.values())
    sigs = [s.signal_type for s in study_dataset.specs.values()]
    p2ps = [s.target_p2p for s in study_dataset.specs.values()]
    assert sigs == ["v1"] * 5 + ["v2"] * 3
    assert p2ps == [0.25, 0.5, 0.75, 1.0, 1.25, 0.5, 0.75, 1.0]


def test_clean_sets_hit_target_p2p(clean_dataset):
    for name, sig, p2p, n, measured in set_summary(clean_dataset):
        # global gain is set on the whole 206 s signal, so any one chunk is within it
        full = np.concatenate([c.samples for c in clean_dataset.sets[name]])
        assert abs(np.ptp(full) - p2p) <= 1e-9 * p2p
        assert measured <= p2p + 1e-12


def test_generation_deterministic():
    specs = default_specs()[:2]
    assert generate_dataset(specs, seed=3) == generate_dataset(specs, seed=3)
    assert not generate_dataset(specs, seed=3) == generate_dataset(specs, seed=4)
    clean = default_specs(0.0)[:1]
    assert generate_dataset(clean, seed=1) == generate_dataset(clean, seed=1)


def test_single_short_spec():
    ds = generate_dataset([DatasetSpec("a", "v1", 1.0, duration=2.0)], seed=0)
    assert len(ds.sets["a"]) == 2


def test_duplicate_names_rejected():
    s = DatasetSpec("a", "v1", 1.0, duration=2.0)
    with pytest.raises(ValueError):
        generate_dataset([s, s])


def test_round_trip(tmp_path):
    ds = generate_dataset([DatasetSpec("a", "v1", 0.3, duration=2.0, noise_sigma=0.01),
                           DatasetSpec("b", "v2", 1.0, duration=3.0)], seed=5)
    p = tmp_path / "d.txt"
    save_dataset(ds, p)
    back = load_dataset(p)
    assert back == ds
    assert back.specs == ds.specs
    assert p.read_text().splitlines()[1] == "set,a,v1,0.3,1666.0,1.0"


def test_empty_dataset_file(tmp_path):
    p = tmp_path / "e.txt"
    save_dataset(Dataset(), p)
    assert load_dataset(p).sets == {}


def test_truncated_file_is_parse_error(tmp_path):
    ds = generate_dataset([DatasetSpec("a", "v1", 0.3, duration=3.0)], seed=0)
    p = tmp_path / "d.txt"
    save_dataset(ds, p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(DatasetParseError) as err:
        load_dataset(p)
    assert err.value.line is not None


def test_bad_number_reports_field(tmp_path):
    ds = generate_dataset([DatasetSpec("a", "v1", 0.3, duration=1.0)], seed=0)
    p = tmp_path / "d.txt"
    save_dataset(ds, p)
    lines = p.read_text().splitlines()
    toks = lines[3].split(",")
    toks[7] = "oops"
    lines[3] = ",".join(toks)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetParseError) as err:
        load_dataset(p)
    assert err.value.line == 4
    assert err.value.field == "sample[7]"


def test_bad_magic(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(DatasetParseError):
        load_dataset(p)


def test_weights_table():
    assert SIGNALS["v1"].weights == tuple(V1_WEIGHTS)
    assert SIGNALS["v2"].weights[4] == 0.2 and SIGNALS["v2"].weights[8] == 2.0
