import numpy as np
import pytest

from cdlearn.core import DimensionError, ValidationError
from cdlearn.data import apparent_from_cd, synth_generate
from cdlearn.dirichlet import amse_loss, dirichlet_mean
from cdlearn.network import (ConfidenceModel, DivergenceError, NetworkConfig, _forward_cache,
                             backward, forward, forward_batch, init_model, load_model,
                             mean_loss, predict_alpha, save_model, train)


def zero_model(m, c, hidden=(3,)):
    cfg = NetworkConfig(input_dim=m, output_dim=c, hidden_dims=hidden)
    model = init_model(cfg, np.random.default_rng(0))
    for W in model.weights:
        W[...] = 0.0
    return model


def random_model(rng, m, hidden, c, activation="tanh"):
    cfg = NetworkConfig(input_dim=m, output_dim=c, hidden_dims=hidden, hidden_activation=activation)
    model = init_model(cfg, rng)
    for b in model.biases:
        b[...] = rng.normal(0, 0.5, b.shape)
    model.biases[-1][...] = rng.uniform(0.2, 1.5, c)
    return model


def fd_param_grads(model, X, Y, h=1e-5):
    out = []
    for p in model.parameters():
        g = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = mean_loss(model, X, Y)
            p[idx] = old - h
            dn = mean_loss(model, X, Y)
            p[idx] = old
            g[idx] = (up - dn) / (2 * h)
        out.append(g)
    return out


def test_zero_model_gives_zero_evidence():
    model = zero_model(4, 3)
    np.testing.assert_array_equal(forward(model, [1.0, -3.0, 2.0, 0.5]).values, np.zeros(3))
    np.testing.assert_array_equal(predict_alpha(model, np.zeros(4)).alpha, np.ones(3))


def test_single_linear_layer_identity():
    cfg = NetworkConfig(input_dim=2, output_dim=2, hidden_dims=(), standardize=False)
    model = ConfidenceModel(cfg, [np.eye(2)], [np.zeros(2)], np.zeros(2), np.ones(2))
    np.testing.assert_array_equal(forward(model, [1.0, -2.0]).values, [1.0, 0.0])


@pytest.mark.parametrize("e, alpha", [([2, 2], [3, 3]), ([6, 0, 0, 0, 0, 0], [7, 1, 1, 1, 1, 1])])
def test_predict_alpha_adds_one(e, alpha):
    c = len(e)
    cfg = NetworkConfig(input_dim=1, output_dim=c, hidden_dims=())
    model = ConfidenceModel(cfg, [np.zeros((1, c))], [np.array(e, dtype=float)], np.zeros(1), np.ones(1))
    np.testing.assert_array_equal(predict_alpha(model, [0.3]).alpha, alpha)


def test_forward_never_negative():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        m, c = rng.integers(1, 6), rng.integers(2, 6)
        hidden = tuple(rng.integers(1, 8, rng.integers(0, 3)))
        model = random_model(rng, m, hidden, c, rng.choice(["tanh", "relu"]))
        model.biases[-1][...] = rng.normal(0, 2, c)
        assert forward(model, rng.normal(0, 3, m)).values.min() >= 0


def test_forward_dimension_mismatch():
    model = zero_model(3, 2)
    with pytest.raises(DimensionError):
        forward(model, [1.0, 2.0])


def test_backward_zero_model_has_zero_gradients():
    model = zero_model(3, 2)
    gW, gb = backward(model, np.array([0.5, -1.0, 2.0]), np.array([0.3, 0.7]))
    for g in gW + gb:
        np.testing.assert_array_equal(g, 0.0)


def test_dead_unit_gets_zero_gradient():
    rng = np.random.default_rng(2)
    model = random_model(rng, 3, (4,), 2)
    model.biases[-1][1] = -50.0  # evidence unit 1 is dead for every input
    x = rng.normal(size=3)
    gW, gb = backward(model, x, np.array([0.4, 0.6]))
    np.testing.assert_array_equal(gW[-1][:, 1], 0.0)
    assert gb[-1][1] == 0.0


def test_backward_small_example_matches_finite_differences():
    rng = np.random.default_rng(3)
    model = random_model(rng, 3, (4,), 2)
    x, y = rng.normal(size=3), np.array([0.35, 0.65])
    gW, gb = backward(model, x, y)
    fd = fd_param_grads(model, x[None], y[None])
    for g, f in zip([v for pair in zip(gW, gb) for v in pair], fd):
        assert np.all(np.abs(g - f) <= 1e-3 * np.maximum(np.abs(f), np.abs(g)) + 1e-8)


@pytest.mark.parametrize("trial", range(24))
def test_backward_random_configurations(trial):
    rng = np.random.default_rng(100 + trial)
    m, c = int(rng.integers(1, 5)), int(rng.integers(2, 5))
    hidden = tuple(int(h) for h in rng.integers(1, 6, rng.integers(1, 3)))
    act = ["tanh", "relu"][trial % 2]
    model = random_model(rng, m, hidden, c, act)
    model.feature_mean[...] = rng.normal(size=m)
    model.feature_scale[...] = rng.uniform(0.5, 2, m)
    X = rng.normal(size=(3, m))
    Y = rng.dirichlet(np.ones(c), 3)
    # keep every ReLU away from its kink so central differences are valid
    _, pre, _ = _forward_cache(model, X)
    relu_layers = pre if act == "relu" else pre[-1:]
    if min(np.abs(z).min() for z in relu_layers) < 1e-3:
        pytest.skip("pre-activation too close to a ReLU kink for this draw")
    gW, gb = backward(model, X, Y)
    fd = fd_param_grads(model, X, Y)
    for g, f in zip([v for pair in zip(gW, gb) for v in pair], fd):
        assert np.all(np.abs(g - f) <= 1e-3 * np.maximum(np.abs(f), np.abs(g)) + 1e-8)


def test_softmax_head_backward():
    rng = np.random.default_rng(9)
    cfg = NetworkConfig(input_dim=3, output_dim=4, hidden_dims=(5,), head="softmax")
    model = init_model(cfg, rng)
    X, Y = rng.normal(size=(4, 3)), rng.dirichlet(np.ones(4), 4)
    gW, gb = backward(model, X, Y)
    fd = fd_param_grads(model, X, Y)
    for g, f in zip([v for pair in zip(gW, gb) for v in pair], fd):
        assert np.all(np.abs(g - f) <= 1e-3 * np.maximum(np.abs(f), np.abs(g)) + 1e-8)


def test_mean_loss_is_batch_mean_of_amse():
    rng = np.random.default_rng(4)
    model = random_model(rng, 2, (3,), 3)
    X, Y = rng.normal(size=(5, 2)), rng.dirichlet(np.ones(3), 5)
    E = forward_batch(model, X)
    expected = np.mean([amse_loss(e + 1, y).total for e, y in zip(E, Y)])
    assert mean_loss(model, X, Y) == pytest.approx(expected, rel=1e-13)


def test_train_constant_target():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    Y = np.tile([0.5, 0.5], (60, 1))
    cfg = NetworkConfig(input_dim=3, output_dim=2, epochs=100, batch_size=16, seed=1)
    model = train(X, Y, cfg)
    E = forward_batch(model, X)
    for e in E:
        np.testing.assert_allclose(dirichlet_mean(e + 1).values, [0.5, 0.5], atol=0.05)


def test_train_single_epoch_history():
    X = np.random.default_rng(0).normal(size=(20, 2))
    Y = np.tile([0.2, 0.8], (20, 1))
    model = train(X, Y, NetworkConfig(input_dim=2, output_dim=2, epochs=1))
    assert len(model.history) == 1 and model.history[0][0] == 1
    with pytest.raises(ValidationError):
        NetworkConfig(input_dim=2, output_dim=2, epochs=0)


@pytest.fixture(scope="module")
def synthetic():
    syn = synth_generate(400, 8, 4, seed=5)
    return syn.dataset.features, apparent_from_cd(syn.dataset.targets).train_targets


def test_train_halves_loss_on_synthetic(synthetic):
    X, Y = synthetic
    model = train(X, Y, NetworkConfig(input_dim=8, output_dim=4, epochs=60, seed=2))
    first, last = model.history[0][1], model.history[-1][1]
    assert last < 0.5 * first


def test_sgd_loss_mostly_non_increasing(synthetic):
    X, Y = synthetic
    cfg = NetworkConfig(input_dim=8, output_dim=4, epochs=60, optimizer="sgd",
                        learning_rate=0.02, batch_size=400, seed=3)
    losses = [l for _, l in train(X, Y, cfg).history]
    non_increasing = np.mean(np.diff(losses) <= 0)
    assert non_increasing >= 0.9


def test_training_is_deterministic(synthetic):
    X, Y = synthetic
    cfg = NetworkConfig(input_dim=8, output_dim=4, epochs=15, seed=7)
    a, b = train(X, Y, cfg), train(X, Y, cfg)
    assert a.history == b.history
    np.testing.assert_array_equal(forward_batch(a, X), forward_batch(b, X))


def test_weight_decay_and_early_stopping(synthetic):
    X, Y = synthetic
    cfg = NetworkConfig(input_dim=8, output_dim=4, epochs=300, seed=7, weight_decay=1e-2,
                        early_stopping=3, early_stopping_tol=1e-2)
    model = train(X, Y, cfg)
    assert len(model.history) < 300


def test_divergence_reported():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2)) * 1e3
    Y = rng.dirichlet(np.ones(3), 30)
    cfg = NetworkConfig(input_dim=2, output_dim=3, optimizer="sgd", learning_rate=1e300,
                        hidden_activation="relu", standardize=False, epochs=5)
    with pytest.raises(DivergenceError) as info:
        train(X, Y, cfg)
    assert info.value.epoch >= 1


def test_train_shape_checks():
    cfg = NetworkConfig(input_dim=2, output_dim=3)
    with pytest.raises(DimensionError):
        train(np.zeros((4, 2)), np.full((4, 2), 0.5), cfg)


def test_serialization_round_trip(tmp_path, synthetic):
    X, Y = synthetic
    model = train(X, Y, NetworkConfig(input_dim=8, output_dim=4, hidden_dims=(6, 5), epochs=3))
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    for a, b in zip(model.parameters(), loaded.parameters()):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(loaded.feature_scale, model.feature_scale)
    assert loaded.config == model.config
    assert loaded.history == model.history
    np.testing.assert_array_equal(forward_batch(loaded, X), forward_batch(model, X))
