import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibnovelty.benchmark import EvalProtocol, Slice
from vibnovelty.hyperopt import (
    JITTER, GPSurrogate, Param, SearchSpace, Trial, default_space, expected_improvement, fit_gp,
    incumbent_curve, make_objective, optimize, read_best_params, read_history, suggest, write_best_params,
    write_history,
)
from vibnovelty.signal_lab import DatasetSpec, generate_dataset

SMALL = EvalProtocol(Slice("s1", 0, 20), Slice("s1", 20, None), Slice("s2"))


def small(noise):
    return generate_dataset([DatasetSpec("s1", "v1", 0.25, duration=40, noise_sigma=noise),
                             DatasetSpec("s2", "v1", 1.25, duration=5, noise_sigma=noise)], seed=0)


def quad(p):
    return (p["x"] - 0.7) ** 2


SPACE1 = SearchSpace((Param("x", "real", -2.0, 3.0),))


def test_param_validation():
    with pytest.raises(ValueError):
        Param("a", "int", 5, 2)
    with pytest.raises(ValueError):
        Param("a", "cat")
    with pytest.raises(ValueError):
        Param("a", "logreal", 0.0, 1.0)
    with pytest.raises(ValueError):
        SearchSpace(())


@settings(max_examples=60, deadline=None)
@given(u=st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_decode_stays_in_domain(u):
    sp = default_space("AER")
    p = sp.decode(u)
    assert 50 <= p["e1"] <= 65 and 10 <= p["e2"] <= 45
    assert 0.01 <= p["lr"] <= 0.1 + 1e-15 and p["bs"] in (32, 64)
    assert isinstance(p["e1"], int)
    # encoding then decoding is a fixed point
    assert sp.decode(sp.encode(p)) == p


def test_default_spaces():
    aea = default_space("AEA")
    assert [(q.low, q.high) for q in aea.params[:2]] == [(75, 80), (85, 100)]
    assert default_space("PCA").params[0].high == 70
    assert default_space("AER", lr_range=(0.01, 0.2)).params[2].high == 0.2
    with pytest.raises(ValueError):
        default_space("OF")


def test_gp_interpolates(rng):
    X = rng.uniform(size=(12, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    gp = GPSurrogate(np.array([0.3, 0.3]), 1.0, JITTER).condition(X, y)
    mu, sd = gp.predict(X)
    assert np.abs(mu - y).max() < 1e-6
    assert sd.max() < 1e-3
    fitted = fit_gp(X, y, fit_noise=False)
    assert np.abs(fitted.predict(X)[0] - y).max() < 1e-6


def test_gp_uncertainty_grows_away_from_data():
    X = np.array([[0.1], [0.2], [0.3]])
    gp = fit_gp(X, np.array([1.0, 0.5, 0.8]))
    assert gp.predict([[0.2]])[1][0] < gp.predict([[0.95]])[1][0]


def test_expected_improvement():
    assert expected_improvement([1.0], [0.0], 1.0)[0] == 0.0
    assert expected_improvement([2.0], [0.0], 1.0)[0] == 0.0
    assert expected_improvement([0.5], [0.0], 1.0)[0] == 0.5
    ei = expected_improvement(np.linspace(-3, 3, 50), np.linspace(0, 2, 50), 0.0)
    assert np.all(ei >= 0)
    # variance shrinking at a worse mean drives EI to zero
    vals = [expected_improvement([1.0], [s], 0.0)[0] for s in (1.0, 0.1, 0.01)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-20


def test_cold_start_is_uniform_draw():
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert suggest(None, SPACE1, r1) == SPACE1.sample(r2)


@pytest.mark.parametrize("seed", range(5))
def test_toy_convergence(seed):
    best, hist = optimize(SPACE1, quad, n_trials=30, seed=seed)
    assert abs(best.params["x"] - 0.7) <= 0.05 * 5.0
    curve = incumbent_curve(hist)
    assert all(b <= a for a, b in zip(curve, curve[1:]))


def test_single_trial_and_determinism():
    best, hist = optimize(SPACE1, quad, n_trials=1, seed=0)
    assert len(hist) == 1 and best is hist[0]
    a = optimize(SPACE1, quad, n_trials=8, seed=2)[1]
    b = optimize(SPACE1, quad, n_trials=8, seed=2)[1]
    assert [t.params for t in a] == [t.params for t in b]
    with pytest.raises(ValueError):
        optimize(SPACE1, quad, n_trials=0)


def test_failures_recorded_and_excluded():
    def obj(p):
        if p["x"] > 0.5:
            raise FloatingPointError("boom")
        return p["x"] ** 2

    best, hist = optimize(SPACE1, obj, n_trials=12, seed=1)
    failed = [t for t in hist if t.status == "failed"]
    assert failed and all(math.isinf(t.J) for t in failed)
    assert best.status == "ok" and math.isfinite(best.J)


def test_all_failed_raises():
    def obj(p):
        raise RuntimeError("nope")

    with pytest.raises(RuntimeError, match="all 3 trials failed"):
        optimize(SPACE1, obj, n_trials=3)


def test_resume_matches_uninterrupted():
    sp = SearchSpace((Param("x", "real", -2, 3), Param("b", "cat", choices=(32, 64))))
    f = lambda p: (p["x"] - 0.7) ** 2 + (p["b"] == 32)  # noqa: E731
    full = optimize(sp, f, 9, seed=3)[1]
    part = optimize(sp, f, 4, seed=3)[1]
    rest = optimize(sp, f, 5, seed=3, history=part)[1]
    assert [t.params for t in full] == [t.params for t in rest]


def test_history_and_best_files(tmp_path):
    sp = default_space("AER")
    trials = [Trial(0, sp.decode([0.1, 0.2, 0.3, 0.9]), 0.5), Trial(1, sp.decode([0.5] * 4), math.inf, "failed")]
    p = tmp_path / "h.csv"
    write_history(p, trials, sp)
    assert p.read_text().splitlines()[0] == "trial,param:e1,param:e2,param:lr,param:bs,J,status"
    back = read_history(p, sp)
    assert [(t.number, t.params, t.J, t.status) for t in back] == [(t.number, t.params, t.J, t.status) for t in trials]
    bp = tmp_path / "best.json"
    write_best_params(bp, {"kmeans": {"PCA": {"n_f": 4}}})
    write_best_params(bp, {"kmeans": {"AER": {"e1": 60}}, "lof": {"PCA": {"n_f": 2}}})
    assert read_best_params(bp) == {"kmeans": {"PCA": {"n_f": 4}, "AER": {"e1": 60}}, "lof": {"PCA": {"n_f": 2}}}


def test_objective_deterministic_and_noise_monotone():
    noisy = make_objective(small(0.01), "kmeans", "PCA", SMALL)
    clean = make_objective(small(0.0), "kmeans", "PCA", SMALL)
    p = {"n_f": 3}
    assert noisy(p) == noisy(p)
    assert clean(p) <= noisy(p)


def test_objective_constant_detector_is_zero(monkeypatch):
    import vibnovelty.hyperopt as ho

    class Const:
        def score(self, V):
            return np.full(len(V), 3.0)

    monkeypatch.setattr(ho, "fit_detector", lambda *a, **k: Const())
    assert make_objective(small(0.01), "kmeans", "PCA", SMALL)({"n_f": 2}) == 0.0


def test_tuned_aer_in_ranges():
    obj = make_objective(small(0.01), "kmeans", "AER", SMALL, ae_epochs=2)
    best, hist = optimize(default_space("AER"), obj, n_trials=6, seed=0)
    assert 50 <= best.params["e1"] <= 65 and 10 <= best.params["e2"] <= 45
    assert math.isfinite(best.J)
