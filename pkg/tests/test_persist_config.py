import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from vibnovelty.benchmark import EvalProtocol, Slice
from vibnovelty.config import ConfigError, RunConfig, load_config, parse_names, parse_sets, write_config
from vibnovelty.persist import ModelFileError, dumps, loads


@settings(max_examples=40, deadline=None)
@given(a=arrays(np.float64, array_shapes(min_dims=0, max_dims=3, max_side=4),
                elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_float_arrays_round_trip_exactly(a):
    kind, params, arrays_ = loads(dumps("t", {"x": 1.5, "s": "v"}, {"a": a}))
    assert kind == "t" and params == {"x": 1.5, "s": "v"}
    assert arrays_["a"].shape == a.shape
    np.testing.assert_array_equal(arrays_["a"], a)


def test_int_arrays_and_empty():
    kind, _, arrs = loads(dumps("t", {}, {"i": np.arange(5), "e": np.zeros((0, 3))}))
    assert arrs["i"].dtype.kind == "i" and list(arrs["i"]) == [0, 1, 2, 3, 4]
    assert arrs["e"].shape == (0, 3)


def test_malformed_model_files():
    with pytest.raises(ModelFileError):
        loads("nonsense\n")
    text = dumps("t", {}, {"a": np.ones((3, 2))})
    with pytest.raises(ModelFileError):
        loads("\n".join(text.splitlines()[:-2]) + "\n")


def test_parse_helpers():
    assert parse_sets("1, 5") == ["set1", "set5"]
    assert parse_sets("set2,custom") == ["set2", "custom"]
    assert parse_names("KMeans,lof", ["kmeans", "lof"], "detector") == ["kmeans", "lof"]
    with pytest.raises(ConfigError):
        parse_names("svm", ["kmeans"], "detector")
    with pytest.raises(ConfigError):
        parse_sets(" , ")


def test_config_round_trip(tmp_path):
    cfg = RunConfig(seed=7, out=tmp_path / "o", noise_sigma=0.0, sets=["set1", "set5"], detectors=["lof"],
                    transforms=["OF", "PCA"], detector_params={"lof": {"k": 7}, "kmeans": {"k_range": [2, 4]}},
                    protocol=EvalProtocol(Slice("set1", 0, 50), Slice("set1", 50, None), None), trials=3)
    p = tmp_path / "run.ini"
    write_config(cfg, p)
    back = load_config(p)
    assert back.to_dict() == cfg.to_dict()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nseed = abc\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[detector.svm]\nnu = 0.1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[run\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_specs_selection():
    cfg = RunConfig(sets=["set3"])
    assert [s.set_name for s in cfg.specs()] == ["set3"]
    with pytest.raises(ConfigError):
        RunConfig(sets=["set9"]).specs()
    assert len(RunConfig().specs()) == 8
