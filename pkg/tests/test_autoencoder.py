import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aestream.autoencoder import (
    EPS,
    AeConfig,
    Autoencoder,
    ConfigurationError,
    bce_loss,
    cost,
    gradient,
    init_autoencoder,
    reconstruct,
    train_window,
)

from oracles import max_rel_error, min_kink_distance, numeric_gradient


def test_layer_dims_single_hidden():
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(8,)))
    assert [l.weight.shape for l in model.layers] == [(2, 8), (8, 2)]


def test_layer_dims_mnist():
    cfg = AeConfig(input_dim=784, hidden_dims=(512, 256))
    assert cfg.layer_dims == [784, 512, 256, 512, 784]
    model = init_autoencoder(cfg)
    assert [l.activation for l in model.layers] == ["leaky_relu"] * 3 + ["sigmoid"]


def test_same_seed_same_weights():
    a = init_autoencoder(AeConfig(input_dim=5, hidden_dims=(4, 3), seed=11))
    b = init_autoencoder(AeConfig(input_dim=5, hidden_dims=(4, 3), seed=11))
    for pa, pb in zip(a.params(), b.params()):
        assert np.array_equal(pa, pb)


def test_he_normal_scale():
    model = init_autoencoder(AeConfig(input_dim=400, hidden_dims=(300,), seed=0))
    w = model.layers[0].weight
    assert w.std() == pytest.approx(math.sqrt(2 / 400), rel=0.02)
    assert np.all(model.layers[0].bias == 0)


@pytest.mark.parametrize("kwargs", [
    dict(input_dim=0),
    dict(input_dim=3, hidden_dims=()),
    dict(input_dim=3, hidden_dims=(0,)),
    dict(input_dim=3, learning_rate=0.0),
    dict(input_dim=3, minibatch_size=0),
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigurationError):
        AeConfig(**kwargs)


def test_reconstruct_range_and_purity():
    model = init_autoencoder(AeConfig(input_dim=4, hidden_dims=(6, 2), seed=1))
    x = np.array([0.0, 1.0, 0.3, 0.9])
    before = [p.copy() for p in model.params()]
    out = reconstruct(model, x)
    assert out.shape == (4,)
    assert np.all((out > 0) & (out < 1))
    assert np.array_equal(out, reconstruct(model, x))
    for p, q in zip(before, model.params()):
        assert np.array_equal(p, q)


def test_zero_network_outputs_half():
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(2,)))
    for p in model.params():
        p[...] = 0.0
    assert np.allclose(reconstruct(model, np.array([0.2, 0.7, 1.0])), 0.5)


def test_reconstruct_dim_mismatch():
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(2,)))
    with pytest.raises(ValueError):
        reconstruct(model, np.zeros(4))


def test_bce_perfect_binary():
    assert bce_loss([1.0, 0.0], [1 - EPS, EPS]) == pytest.approx(0.0, abs=1e-6)


def test_bce_hand_values():
    assert bce_loss([1.0], [0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert bce_loss([0.5], [0.5]) == pytest.approx(math.log(2), abs=1e-12)


def test_bce_clips_saturated_outputs():
    assert math.isfinite(bce_loss([1.0, 0.0], [0.0, 1.0]))
    assert bce_loss([1.0], [0.0]) == pytest.approx(-math.log(EPS))


def test_bce_dim_mismatch():
    with pytest.raises(ValueError):
        bce_loss([1.0, 0.0], [0.5])


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=10))
def test_bce_non_negative(pairs):
    x = np.array([p[0] for p in pairs])
    x_hat = np.array([p[1] for p in pairs])
    value = bce_loss(x, x_hat)
    assert value >= 0 and math.isfinite(value)


def test_gradient_small_model_matches_finite_differences():
    rng = np.random.default_rng(0)
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(3,), seed=5))
    batch = rng.uniform(0, 1, size=(4, 2))
    assert max_rel_error(gradient(model, batch), numeric_gradient(model, batch)) < 1e-4


def test_gradient_identical_batch_equals_single():
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(4, 2), seed=2))
    x = np.array([0.1, 0.5, 0.8])
    single = gradient(model, x[None, :])
    many = gradient(model, np.repeat(x[None, :], 7, axis=0))
    for a, b in zip(single, many):
        assert np.allclose(a, b, atol=1e-14)


def test_gradient_vanishes_at_optimum():
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(2,), seed=0))
    # Hidden activations are zero so the output is sigmoid(bias); a huge bias
    # of the right sign makes the reconstruction of (1, 0) essentially exact.
    for layer in model.layers:
        layer.weight[...] = 0.0
    model.layers[-1].bias[...] = [30.0, -30.0]
    grads = gradient(model, np.array([[1.0, 0.0]]))
    assert sum(float(np.sum(g * g)) for g in grads) == pytest.approx(0.0, abs=1e-20)


def test_gradient_empty_batch():
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(3,)))
    with pytest.raises(ValueError):
        gradient(model, np.empty((0, 2)))


def test_training_reduces_loss():
    model = init_autoencoder(AeConfig(input_dim=4, hidden_dims=(8, 3), seed=3, epochs=1))
    window = np.repeat(np.array([[0.9, 0.1, 0.8, 0.2]]), 100, axis=0)
    initial = cost(model, window)
    curve = [train_window(model, window) for _ in range(10)]
    assert curve[-1] < initial
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_zero_epochs_is_noop():
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(2,), seed=1, epochs=0))
    before = [p.copy() for p in model.params()]
    train_window(model, np.full((5, 3), 0.4))
    for p, q in zip(before, model.params()):
        assert np.array_equal(p, q)
    assert model.adam_step == 0


def test_single_instance_window_clamps_batch():
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(2,), minibatch_size=128, epochs=2))
    train_window(model, np.array([[0.2, 0.3, 0.4]]))
    assert model.adam_step == 2


def test_adam_step_counts_minibatches():
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(3,), minibatch_size=4, epochs=3))
    train_window(model, np.full((10, 2), 0.5))
    assert model.adam_step == 3 * 3


def test_empty_window_rejected():
    model = init_autoencoder(AeConfig(input_dim=2, hidden_dims=(3,)))
    with pytest.raises(ValueError):
        train_window(model, [])


def test_training_is_deterministic():
    cfg = AeConfig(input_dim=3, hidden_dims=(5, 2), seed=9, epochs=4, minibatch_size=8)
    window = np.random.default_rng(1).uniform(size=(30, 3))
    a, b = init_autoencoder(cfg), init_autoencoder(cfg)
    train_window(a, window)
    train_window(b, window)
    for pa, pb in zip(a.params(), b.params()):
        assert np.array_equal(pa, pb)
        assert np.all(np.isfinite(pa))


def test_snapshot_round_trip(tmp_path):
    model = init_autoencoder(AeConfig(input_dim=3, hidden_dims=(4,), seed=4))
    train_window(model, np.full((6, 3), 0.3))
    path = tmp_path / "model.json"
    model.save(path)
    loaded = Autoencoder.load(path)
    x = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(reconstruct(model, x), reconstruct(loaded, x))


@settings(max_examples=20, deadline=None)
@given(
    d=st.integers(1, 5),
    hidden=st.lists(st.integers(1, 5), min_size=1, max_size=2),
    n=st.integers(1, 4),
    seed=st.integers(0, 2**16),
)
def test_gradient_check_property(d, hidden, n, seed):
    model = init_autoencoder(AeConfig(input_dim=d, hidden_dims=tuple(hidden), seed=seed))
    batch = np.random.default_rng(seed).uniform(0, 1, size=(n, d))
    assume(min_kink_distance(model, batch) > 1e-3)
    assert max_rel_error(gradient(model, batch), numeric_gradient(model, batch)) < 1e-4
