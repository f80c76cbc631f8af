import numpy as np
import pytest

from balm import Architecture, Window, init_params
from balm.inference import (
    PredictiveSamples,
    mc_predict,
    mc_predict_pool,
    predictive_label,
    predictive_mean,
)
from balm.network import OFF, Stochastic, forward
from balm.inference import derive_pass_seed

from conftest import make_windows


@pytest.fixture
def window():
    return Window("w0", np.random.default_rng(20).normal(size=(2, 32)))


def test_zero_dropout_rows_equal_deterministic_forward(window):
    params = init_params(Architecture(dropout_p=0.0), seed=1)
    samples = mc_predict(params, window, n_passes=7, seed=5)
    reference = forward(params, window, OFF)
    for row in samples.probs:
        assert np.array_equal(row, reference)


def test_mc_predict_is_seed_deterministic(params, window):
    a = mc_predict(params, window, n_passes=10, seed=5)
    b = mc_predict(params, window, n_passes=10, seed=5)
    assert np.array_equal(a.probs, b.probs)
    assert a.pass_seeds == b.pass_seeds
    c = mc_predict(params, window, n_passes=10, seed=6)
    assert not np.array_equal(a.probs, c.probs)


def test_each_row_matches_single_stochastic_forward(params, window):
    samples = mc_predict(params, window, n_passes=5, seed=3)
    for t in range(5):
        solo = forward(params, window, Stochastic(derive_pass_seed(3, window.id, t)))
        assert np.array_equal(samples.probs[t], solo)


def test_pool_scoring_matches_per_window_calls(params):
    windows = make_windows(9, seed=21, labeled=False)
    pooled = mc_predict_pool(params, windows, n_passes=4, seed=11)
    for w, got in zip(windows, pooled):
        solo = mc_predict(params, w, n_passes=4, seed=11)
        assert np.array_equal(got.probs, solo.probs)
        assert got.pass_seeds == solo.pass_seeds


def test_pool_scores_do_not_depend_on_pool_composition(params):
    windows = make_windows(6, seed=22, labeled=False)
    full = {s.window_id: s.probs for s in mc_predict_pool(params, windows, 3, seed=9)}
    subset = {s.window_id: s.probs for s in mc_predict_pool(params, windows[2:5], 3, seed=9)}
    for wid, probs in subset.items():
        assert np.array_equal(probs, full[wid])


def test_mc_predict_rejects_zero_passes(params, window):
    with pytest.raises(ValueError, match="n_passes"):
        mc_predict(params, window, n_passes=0, seed=1)


def test_monte_carlo_means_self_consistent(params, window):
    # two independent 10k-pass estimates of the same predictive mean
    a = predictive_mean(mc_predict(params, window, n_passes=10_000, seed=100))
    b = predictive_mean(mc_predict(params, window, n_passes=10_000, seed=200))
    assert np.abs(a - b).max() < 0.01


def test_predictive_mean_examples():
    s = PredictiveSamples("w", np.array([[1.0, 0.0], [0.0, 1.0]]), (0, 1))
    assert np.allclose(predictive_mean(s), [0.5, 0.5])
    one = PredictiveSamples("w", np.array([[0.25, 0.75]]), (0,))
    assert np.allclose(predictive_mean(one), [0.25, 0.75])
    s2 = PredictiveSamples("w", np.array([[0.8, 0.2], [0.6, 0.4]]), (0, 1))
    assert np.allclose(predictive_mean(s2), [0.7, 0.3])


def test_predictive_mean_stays_within_row_envelope(params, window):
    samples = mc_predict(params, window, n_passes=25, seed=4)
    mean = predictive_mean(samples)
    assert np.all(mean >= samples.probs.min(axis=0) - 1e-12)
    assert np.all(mean <= samples.probs.max(axis=0) + 1e-12)
    assert abs(mean.sum() - 1.0) <= 1e-6


def test_predictive_label_argmax_and_tie_rule():
    assert predictive_label(np.array([0.7, 0.3])) == 0
    assert predictive_label(np.array([0.3, 0.7])) == 1
    assert predictive_label(np.array([0.5, 0.5])) == 0


def test_samples_validation_rejects_bad_rows():
    with pytest.raises(ValueError):
        PredictiveSamples("w", np.array([[0.9, 0.3]]), (0,))
    with pytest.raises(ValueError):
        PredictiveSamples("w", np.zeros((0, 2)), ())
