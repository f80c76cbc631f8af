import numpy as np
import pytest

from balm import Architecture, OptimizerHyper, init_params
from balm.network import Gradients, OFF, grad
from balm.optimizer import adam_step, adam_update, fit

from conftest import make_windows


def zero_grads_like(params):
    return Gradients(
        conv_w=[np.zeros_like(a) for a in params.conv_w],
        conv_b=[np.zeros_like(a) for a in params.conv_b],
        dense_w=[np.zeros_like(a) for a in params.dense_w],
        dense_b=[np.zeros_like(a) for a in params.dense_b],
    )


def test_zero_gradients_leave_parameters_unchanged():
    params = init_params(Architecture(), seed=1)
    before = [a.copy() for _, a in params.named_arrays()]
    updated = adam_step(params, zero_grads_like(params), OptimizerHyper())
    assert updated.adam_t == 1
    for (_, a), b in zip(updated.named_arrays(), before):
        assert np.array_equal(a, b)
    # input untouched
    assert params.adam_t == 0


def test_first_step_on_scalar_matches_hand_computation():
    # defaults: update = lr * m_hat / (sqrt(v_hat) + eps) = 0.001 * 0.1 / (0.1 + 1e-8)
    theta = np.array([1.0])
    m = np.zeros(1)
    v = np.zeros(1)
    adam_update(theta, np.array([0.1]), m, v, t=1, hyper=OptimizerHyper())
    assert theta[0] == pytest.approx(0.999, abs=1e-9)


def test_two_steps_reproduce_a_recorded_trace():
    hyper = OptimizerHyper()
    params = init_params(Architecture(), seed=2)
    batch = make_windows(4, seed=7)

    def run():
        p = params.copy()
        states = []
        for _ in range(2):
            grads, _ = grad(p, batch, OFF)
            p = adam_step(p, grads, hyper)
            states.append([a.copy() for _, a in p.named_arrays()])
        return states

    first, second = run(), run()
    for sa, sb in zip(first, second):
        for a, b in zip(sa, sb):
            assert np.array_equal(a, b)


def test_adam_step_rejects_shape_mismatch():
    params = init_params(Architecture(), seed=3)
    grads = zero_grads_like(params)
    grads.dense_b[0] = np.zeros(7)
    with pytest.raises(ValueError, match="shape mismatch"):
        adam_step(params, grads, OptimizerHyper())


def test_hyper_validation():
    with pytest.raises(ValueError):
        OptimizerHyper(learning_rate=0)
    with pytest.raises(ValueError):
        OptimizerHyper(beta1=1.0)
    with pytest.raises(ValueError):
        OptimizerHyper(epsilon=0)


def test_fit_zero_epochs_returns_unchanged_params_and_empty_trace():
    params = init_params(Architecture(), seed=4)
    out, trace = fit(params, make_windows(8, seed=8), epochs=0, hyper=OptimizerHyper(), seed=42)
    assert trace == []
    for (_, a), (_, b) in zip(out.named_arrays(), params.named_arrays()):
        assert np.array_equal(a, b)


def test_fit_is_seed_deterministic():
    params = init_params(Architecture(), seed=5)
    data = make_windows(20, seed=9)
    out1, trace1 = fit(params, data, epochs=3, hyper=OptimizerHyper(), seed=42)
    out2, trace2 = fit(params, data, epochs=3, hyper=OptimizerHyper(), seed=42)
    assert trace1 == trace2
    for (_, a), (_, b) in zip(out1.named_arrays(), out2.named_arrays()):
        assert np.array_equal(a, b)
    out3, _ = fit(params, data, epochs=3, hyper=OptimizerHyper(), seed=43)
    assert any(
        not np.array_equal(a, b)
        for (_, a), (_, b) in zip(out1.named_arrays(), out3.named_arrays())
    )


def test_fit_trace_has_one_entry_per_epoch():
    params = init_params(Architecture(), seed=6)
    _, trace = fit(params, make_windows(10, seed=10), epochs=4, hyper=OptimizerHyper(), seed=1)
    assert len(trace) == 4


def test_fit_rejects_empty_or_unlabeled_data():
    params = init_params(Architecture(), seed=7)
    with pytest.raises(ValueError, match="non-empty"):
        fit(params, [], epochs=1, hyper=OptimizerHyper(), seed=0)
    data = make_windows(3, seed=11)
    data[0] = data[0].without_label()
    with pytest.raises(ValueError, match="unlabeled"):
        fit(params, data, epochs=1, hyper=OptimizerHyper(), seed=0)
