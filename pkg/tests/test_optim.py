import numpy as np
import pytest

from tdnn_enhance.optim import AdamState, adam_step, lr_update


def params_and_state(seed=0, lr=0.0005):
    rng = np.random.default_rng(seed)
    params = [rng.standard_normal((3, 4)), rng.standard_normal(4)]
    return params, AdamState.for_params(params, lr)


def test_zero_gradient_leaves_params():
    params, state = params_and_state()
    new, state = adam_step(params, [np.zeros_like(p) for p in params], state)
    assert state.t == 1
    for a, b in zip(params, new):
        np.testing.assert_array_equal(a, b)


def test_first_step_moves_by_lr_times_sign():
    # |g| >= 5 keeps lr * eps / (|g| + eps) below 1e-12
    params, state = params_and_state(1)
    rng = np.random.default_rng(1)
    grads = [rng.uniform(5, 50, p.shape) * rng.choice([-1, 1], p.shape) for p in params]
    new, _ = adam_step(params, grads, state)
    for p, q, g in zip(params, new, grads):
        np.testing.assert_allclose(q - p, -0.0005 * np.sign(g), rtol=0, atol=1e-12)


def test_two_constant_steps_bounded():
    params, state = params_and_state(2)
    grads = [np.full_like(p, 0.3) for p in params]
    cur = params
    for _ in range(2):
        cur, state = adam_step(cur, grads, state)
    for p, q in zip(params, cur):
        assert np.all(np.abs(q - p) <= 2 * 0.0005 + 1e-15)


def test_moments_stay_shaped_and_v_nonnegative():
    params, state = params_and_state(3)
    rng = np.random.default_rng(3)
    for _ in range(5):
        params, state = adam_step(params, [rng.standard_normal(p.shape) for p in params], state)
    for p, m, v in zip(params, state.m, state.v):
        assert m.shape == v.shape == p.shape and np.all(v >= 0)
    assert state.t == 5


def test_lr_decays_on_increase():
    _, state = params_and_state()
    lr_update(state, 0.5, 0.6)
    assert state.learning_rate == pytest.approx(0.00035, rel=1e-15)


def test_lr_kept_when_equal():
    _, state = params_and_state()
    lr_update(state, 0.5, 0.5)
    assert state.learning_rate == 0.0005


def test_three_increases_compose():
    _, state = params_and_state()
    for prev, cur in [(0.1, 0.2), (0.2, 0.3), (0.3, 0.4)]:
        lr_update(state, prev, cur)
    assert state.learning_rate == pytest.approx(0.0005 * 0.7**3, rel=1e-14)
