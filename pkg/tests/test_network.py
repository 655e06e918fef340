import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_receptive_set, finite_difference_check, naive_forward
from tdnn_enhance.errors import InvalidArgument
from tdnn_enhance.network import (
    CONTEXT_PRESETS,
    NETWORK_CONTEXT,
    TdnnLayer,
    TdnnModel,
    build_model,
    forward,
    forward_backward,
    receptive_field,
    splice,
    unsplice,
)


def random_model(contexts, hidden, seed, in_dim=129, out_dim=129):
    rng = np.random.default_rng(seed)
    model = build_model(
        contexts, hidden, input_dim=in_dim, output_dim=out_dim, seed=seed,
        mean=rng.uniform(0, 1, in_dim), std=rng.uniform(0.5, 2, in_dim),
    )
    for layer in model.layers:
        layer.bias = layer.bias + rng.uniform(-0.1, 0.1, layer.bias.shape)
    return model


def test_splice_identity_context():
    x = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(splice(x, (0, 0)), x)


def test_splice_hand_example():
    out = splice(np.array([[1.0], [2.0], [3.0]]), (-1, 1))
    np.testing.assert_array_equal(out, [[1, 1, 2], [1, 2, 3], [2, 3, 3]])


@settings(max_examples=40, deadline=None)
@given(T=st.integers(1, 12), left=st.integers(-4, 0), right=st.integers(0, 4), t0=st.integers(0, 11))
def test_splice_perturbation_locality(T, left, right, t0):
    t0 = t0 % T
    x = np.random.default_rng(T).standard_normal((T, 2))
    bumped = x.copy()
    bumped[t0] += 1.0
    changed = np.flatnonzero(np.any(splice(bumped, (left, right)) != splice(x, (left, right)), axis=1))
    assert all(t0 - right <= t <= t0 - left for t in changed)
    # interior frames are always affected
    for t in range(max(0, t0 - right), min(T, t0 - left + 1)):
        assert t in changed


@settings(max_examples=30, deadline=None)
@given(T=st.integers(1, 10), left=st.integers(-3, 0), right=st.integers(0, 3), seed=st.integers(0, 1000))
def test_unsplice_is_adjoint(T, left, right, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((T, 3))
    g = rng.standard_normal((T, 3 * (right - left + 1)))
    lhs = np.sum(splice(x, (left, right)) * g)
    rhs = np.sum(x * unsplice(g, (left, right), T, 3))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_identity_network():
    layer = TdnnLayer((0, 0), np.eye(129), np.zeros(129), "linear")
    model = TdnnModel([layer], mean=np.zeros(129), std=np.ones(129))
    x = np.random.default_rng(0).uniform(0, 3, (10, 129))
    np.testing.assert_array_equal(forward(model, x), x)


def test_zero_model_outputs_zero():
    model = build_model(CONTEXT_PRESETS["tdnn-f"], 32, output_bias=0.0)
    for layer in model.layers:
        layer.weight[:] = 0.0
    assert not np.any(forward(model, np.random.default_rng(0).uniform(0, 5, (20, 129))))


@pytest.mark.parametrize("seed", range(4))
def test_forward_matches_naive_oracle(seed):
    model = random_model([(-1, 1), (-2, 2), (0, 0)], 8, seed)
    x = np.random.default_rng(100 + seed).uniform(0, 3, (7, 129))
    np.testing.assert_allclose(forward(model, x), naive_forward(model, x), rtol=1e-5, atol=1e-12)


def test_forward_dimension_mismatch():
    model = build_model(CONTEXT_PRESETS["dnn"], 16)
    with pytest.raises(InvalidArgument):
        forward(model, np.zeros((5, 128)))


def test_forward_is_deterministic_and_nonnegative():
    model = random_model(CONTEXT_PRESETS["tdnn-a"], 16, 3)
    x = np.random.default_rng(3).uniform(0, 3, (30, 129))
    a, b = forward(model, x), forward(model, x)
    assert np.array_equal(a, b)
    assert np.all(a >= 0)


def test_float32_path_close_to_float64():
    model = random_model(CONTEXT_PRESETS["tdnn-f"], 64, 4)
    x = np.random.default_rng(4).uniform(0, 3, (50, 129))
    ref = forward(model, x)
    fast = forward(model, x, dtype=np.float32)
    assert np.max(np.abs(fast - ref)) <= 1e-3 * np.max(np.abs(ref))


def test_all_zero_context_equals_dense_network():
    model = random_model([(0, 0)] * 3, 12, 5)
    x = np.random.default_rng(5).uniform(0, 3, (9, 129))
    h = (x - model.mean) / model.std
    for layer in model.layers:
        h = np.maximum(h @ layer.weight.T + layer.bias, 0.0)
    assert np.max(np.abs(forward(model, x) - h)) <= 1e-12


def test_loss_zero_at_self_consistent_target():
    model = random_model([(-1, 1), (0, 0)], 8, 6)
    y = np.random.default_rng(6).uniform(0.1, 3, (8, 129))
    clean = y * forward(model, y)
    loss, grads = forward_backward(model, y, clean)
    assert loss == 0.0
    assert all(not np.any(g) for g in grads)


def test_loss_scales_quadratically_for_constant_output():
    model = build_model([(-1, 1), (0, 0)], 8, output_bias=0.7)
    for layer in model.layers:
        layer.weight[:] = 0.0
    rng = np.random.default_rng(7)
    y, x = rng.uniform(0, 2, (8, 129)), rng.uniform(0, 2, (8, 129))
    l1, _ = forward_backward(model, y, x)
    l2, _ = forward_backward(model, 2 * y, 2 * x)
    assert l2 == pytest.approx(4 * l1, rel=1e-12)


def test_gradients_match_finite_differences():
    model = random_model([(-1, 1), (-2, 2), (0, 0)], 6, 8)
    rng = np.random.default_rng(8)
    y = rng.uniform(0, 2, (8, 129))
    x = y * rng.uniform(0, 1, (8, 129))
    _, grads = forward_backward(model, y, x)
    assert finite_difference_check(model, y, x, grads) < 1e-4


def test_shape_mismatch_in_forward_backward():
    model = build_model([(0, 0)], 4)
    with pytest.raises(InvalidArgument):
        forward_backward(model, np.ones((3, 129)), np.ones((4, 129)))


@pytest.mark.parametrize("name", sorted(CONTEXT_PRESETS))
def test_preset_network_context_is_sum_of_layers(name):
    assert receptive_field(CONTEXT_PRESETS[name]) == NETWORK_CONTEXT[name]
    assert len(CONTEXT_PRESETS[name]) == 5 and CONTEXT_PRESETS[name][-1] == (0, 0)


@pytest.mark.parametrize("name", ["tdnn-f", "dnn", "tdnn-b"])
def test_receptive_field_by_perturbation(name):
    model = random_model(CONTEXT_PRESETS[name], 16, 9)
    for layer in model.layers:
        layer.bias = np.abs(layer.bias) + 0.5
    x = np.random.default_rng(9).uniform(0, 3, (60, 129))
    lo, hi = receptive_field(CONTEXT_PRESETS[name])
    t0 = 30
    assert brute_receptive_set(model, x, t0) == set(range(t0 - hi, t0 - lo + 1))


def test_bad_layer_shapes():
    with pytest.raises(InvalidArgument):
        TdnnLayer((1, 2), np.zeros((2, 4)), np.zeros(2))
    with pytest.raises(InvalidArgument):
        TdnnModel([TdnnLayer((0, 0), np.zeros((4, 129)), np.zeros(4)),
                   TdnnLayer((0, 0), np.zeros((129, 5)), np.zeros(129))])
