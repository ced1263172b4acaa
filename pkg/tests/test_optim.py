import numpy as np
import pytest

from embadapt.errors import NonFiniteGradient, ShapeMismatch
from embadapt.optim import AdamWState, adamw_step


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def test_zero_grad_zero_decay_is_noop():
    params = {"w": rng(1).standard_normal((3, 4))}
    ref = params["w"].copy()
    state = AdamWState(lr=0.1, weight_decay=0.0)
    for _ in range(5):
        adamw_step(state, params, {"w": np.zeros((3, 4))})
    np.testing.assert_allclose(params["w"], ref, atol=1e-15)


def test_first_step_scalar_hand_derived():
    # t=1: m_hat = g, v_hat = g^2, so the update is lr * g/(|g| + eps)
    params = {"w": np.array([1.0])}
    state = AdamWState(lr=0.01, weight_decay=0.0)
    adamw_step(state, params, {"w": np.array([1.0])})
    expected = 1.0 - 0.01 * (1.0 / (1.0 + 1e-8))
    assert params["w"][0] == pytest.approx(expected, abs=1e-15)
    assert abs(params["w"][0] - 0.99) < 1e-9


def test_decay_only_step():
    params = {"w": np.array([1.0])}
    state = AdamWState(lr=0.01, weight_decay=0.2)
    adamw_step(state, params, {"w": np.array([0.0])})
    assert params["w"][0] == pytest.approx(1.0 - 0.01 * 0.2 * 1.0, abs=1e-15)


def test_decay_is_decoupled_from_adaptive_term():
    # with decoupled decay, the update is (adamw without decay) - lr*wd*theta
    g = rng(2)
    theta0 = g.standard_normal(6)
    grad = g.standard_normal(6)
    plain = {"w": theta0.copy()}
    decayed = {"w": theta0.copy()}
    adamw_step(AdamWState(lr=0.05, weight_decay=0.0), plain, {"w": grad.copy()})
    adamw_step(AdamWState(lr=0.05, weight_decay=0.3), decayed, {"w": grad.copy()})
    np.testing.assert_allclose(decayed["w"], plain["w"] - 0.05 * 0.3 * theta0,
                               atol=1e-14)


def test_bias_decay_toggle():
    theta0 = np.array([2.0])
    kept = {"b1": theta0.copy()}
    decayed = {"b1": theta0.copy()}
    adamw_step(AdamWState(lr=0.01, weight_decay=0.5, decay_biases=False),
               kept, {"b1": np.array([0.0])})
    adamw_step(AdamWState(lr=0.01, weight_decay=0.5, decay_biases=True),
               decayed, {"b1": np.array([0.0])})
    assert kept["b1"][0] == pytest.approx(2.0)
    assert decayed["b1"][0] == pytest.approx(2.0 - 0.01 * 0.5 * 2.0)


def test_matches_reference_implementation():
    # independent scalar-loop oracle for a short trajectory
    g = rng(3)
    theta = g.standard_normal(5)
    grads = [g.standard_normal(5) for _ in range(10)]

    lr, b1, b2, eps, wd = 0.02, 0.9, 0.999, 1e-8, 0.1
    ref = theta.copy()
    m = np.zeros(5)
    v = np.zeros(5)
    for t, grad in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad ** 2
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        ref = ref - lr * (mh / (np.sqrt(vh) + eps) + wd * ref)

    params = {"w": theta.copy()}
    state = AdamWState(lr=lr, beta1=b1, beta2=b2, eps=eps, weight_decay=wd)
    for grad in grads:
        adamw_step(state, params, {"w": grad.copy()})
    np.testing.assert_allclose(params["w"], ref, atol=1e-12)
    assert state.step_count == 10


def test_deterministic_bitwise():
    def run():
        g = rng(4)
        params = {"w": g.standard_normal((2, 3)), "b1": g.standard_normal(3)}
        state = AdamWState(lr=0.01, weight_decay=0.2)
        for _ in range(20):
            adamw_step(state, params,
                       {"w": g.standard_normal((2, 3)), "b1": g.standard_normal(3)})
        return params

    a, b = run(), run()
    assert np.array_equal(a["w"], b["w"])
    assert np.array_equal(a["b1"], b["b1"])


def test_optimizes_convex_quadratic():
    target = np.array([1.0, -2.0, 0.5, 3.0])
    params = {"w": np.zeros(4)}
    state = AdamWState(lr=0.05, weight_decay=0.0)
    start = float(np.sum((params["w"] - target) ** 2))
    for _ in range(300):
        adamw_step(state, params, {"w": 2.0 * (params["w"] - target)})
    end = float(np.sum((params["w"] - target) ** 2))
    assert end < 0.1 * start


def test_shape_mismatch():
    state = AdamWState()
    with pytest.raises(ShapeMismatch):
        adamw_step(state, {"w": np.zeros(3)}, {"w": np.zeros(4)})
    with pytest.raises(ShapeMismatch):
        adamw_step(state, {"w": np.zeros(3)}, {"x": np.zeros(3)})


def test_nonfinite_gradient():
    state = AdamWState()
    params = {"w": np.zeros(3)}
    ref = params["w"].copy()
    with pytest.raises(NonFiniteGradient):
        adamw_step(state, params, {"w": np.array([1.0, np.nan, 0.0])})
    # rejected update must not touch parameters or step count
    assert np.array_equal(params["w"], ref)
    assert state.step_count == 0
