"""Tests for the dense network engine, centered on gradient verification."""
import json
import math

import numpy as np
import pytest

from ltgen import nn

import oracles


def small_config(rng, output_activation=None, dropout=None):
    return nn.NetworkConfig(
        input_dim=int(rng.integers(2, 7)),
        output_dim=int(rng.integers(1, 4)),
        n_layers=int(rng.integers(1, 4)),
        n_neurons=int(rng.integers(3, 17)),
        dropout_rate=float(rng.uniform(0.1, 0.5)) if dropout is None else dropout,
        learning_rate=1e-3,
        output_activation=(output_activation if output_activation is not None
                           else ("tanh" if rng.random() < 0.5 else "sigmoid")),
    )


def sample_net_away_from_kinks(config, rng, batch, mask_seed, min_gap=1e-3):
    """Draw networks until no leaky-rectifier pre-activation sits near zero.

    Finite differences across the kink would not match the analytic
    piecewise gradient, so gradient checks use networks whose pre-activations
    keep a safe margin under the frozen dropout masks.
    """
    for _ in range(200):
        net = nn.init_network(config, rng)
        _, cache = nn.forward(net, batch, mode="train",
                              rng=np.random.default_rng(mask_seed))
        gap = min(float(np.min(np.abs(z))) for z in cache.pre_acts)
        if gap > min_gap:
            return net
    raise AssertionError("could not sample a kink-free network")


# --- config and construction ------------------------------------------------

def test_config_validation():
    good = dict(input_dim=4, output_dim=1, n_layers=2, n_neurons=8,
                dropout_rate=0.2, learning_rate=1e-3, output_activation="sigmoid")
    nn.NetworkConfig(**good)
    for key, bad in [("n_layers", 0), ("n_neurons", 0), ("dropout_rate", 1.0),
                     ("dropout_rate", -0.1), ("learning_rate", 0.0),
                     ("output_activation", "relu"), ("input_dim", 0)]:
        with pytest.raises(ValueError):
            nn.NetworkConfig(**{**good, key: bad})


def test_layer_sizes_chain():
    config = nn.NetworkConfig(input_dim=4, output_dim=2, n_layers=3, n_neurons=8,
                              dropout_rate=0.0, learning_rate=1e-3,
                              output_activation="tanh")
    assert config.layer_sizes() == [4, 8, 8, 8, 2]
    net = nn.init_network(config, np.random.default_rng(0))
    assert [w.shape for w in net.weights] == [(8, 4), (8, 8), (8, 8), (2, 8)]
    assert all(b.shape == (w.shape[0], 1) for w, b in zip(net.weights, net.biases))


def test_init_bounds_follow_fan_in():
    config = nn.NetworkConfig(input_dim=16, output_dim=1, n_layers=1, n_neurons=64,
                              dropout_rate=0.0, learning_rate=1e-3,
                              output_activation="sigmoid")
    net = nn.init_network(config, np.random.default_rng(0))
    assert float(np.max(np.abs(net.weights[0]))) <= 1.0 / 4.0
    assert float(np.max(np.abs(net.weights[1]))) <= 1.0 / 8.0
    assert all(not np.any(b) for b in net.biases)


def test_forward_rejects_bad_batch():
    config = nn.NetworkConfig(input_dim=4, output_dim=1, n_layers=1, n_neurons=4,
                              dropout_rate=0.0, learning_rate=1e-3,
                              output_activation="sigmoid")
    net = nn.init_network(config, np.random.default_rng(0))
    with pytest.raises(nn.DimensionError):
        nn.forward(net, np.zeros((3, 5)))
    with pytest.raises(nn.DimensionError):
        nn.forward(net, np.zeros(4))


# --- forward semantics -------------------------------------------------------

def test_zero_weight_sigmoid_outputs_half():
    config = nn.NetworkConfig(input_dim=3, output_dim=2, n_layers=2, n_neurons=5,
                              dropout_rate=0.0, learning_rate=1e-3,
                              output_activation="sigmoid")
    net = nn.init_network(config, np.random.default_rng(0))
    for w in net.weights:
        w[:] = 0.0
    out, _ = nn.forward(net, np.random.default_rng(1).normal(size=(3, 7)))
    assert np.all(out == 0.5)


def test_no_dropout_makes_train_equal_eval():
    rng = np.random.default_rng(2)
    config = small_config(rng, dropout=0.0)
    net = nn.init_network(config, rng)
    x = rng.normal(size=(config.input_dim, 9))
    out_train, _ = nn.forward(net, x, mode="train", rng=rng)
    out_eval, _ = nn.forward(net, x, mode="eval")
    assert np.array_equal(out_train, out_eval)


def test_train_mode_with_dropout_requires_rng():
    rng = np.random.default_rng(3)
    config = small_config(rng, dropout=0.4)
    net = nn.init_network(config, rng)
    with pytest.raises(ValueError):
        nn.forward(net, np.zeros((config.input_dim, 2)), mode="train")


def test_eval_mode_consumes_no_randomness():
    rng = np.random.default_rng(4)
    config = small_config(rng, dropout=0.4)
    net = nn.init_network(config, rng)
    probe = np.random.default_rng(99)
    state_before = json.dumps(probe.bit_generator.state)
    nn.forward(net, np.zeros((config.input_dim, 3)), mode="eval", rng=probe)
    assert json.dumps(probe.bit_generator.state) == state_before


def test_dropout_expectation_approaches_eval_output():
    # Monte Carlo oracle: inverted dropout is unbiased before the next
    # nonlinearity, so with gentle weights the averaged train-mode output
    # lands near the eval output.
    rng = np.random.default_rng(5)
    config = nn.NetworkConfig(input_dim=4, output_dim=2, n_layers=1, n_neurons=16,
                              dropout_rate=0.3, learning_rate=1e-3,
                              output_activation="sigmoid")
    net = nn.init_network(config, rng)
    for w in net.weights:
        w *= 0.3
    x = rng.normal(size=(4, 5))
    eval_out, _ = nn.forward(net, x, mode="eval")
    total = np.zeros_like(eval_out)
    for _ in range(10_000):
        out, _ = nn.forward(net, x, mode="train", rng=rng)
        total += out
    assert float(np.max(np.abs(total / 10_000 - eval_out))) < 1e-2


def test_dropout_masks_scale_by_keep_probability():
    rng = np.random.default_rng(6)
    config = nn.NetworkConfig(input_dim=3, output_dim=1, n_layers=2, n_neurons=50,
                              dropout_rate=0.4, learning_rate=1e-3,
                              output_activation="sigmoid")
    net = nn.init_network(config, rng)
    _, cache = nn.forward(net, rng.normal(size=(3, 20)), mode="train", rng=rng)
    for mask in cache.masks:
        values = np.unique(mask)
        assert set(np.round(values, 12)) <= {0.0, round(1.0 / 0.6, 12)}


# --- gradients ---------------------------------------------------------------

def test_backward_rejects_stale_cache():
    rng = np.random.default_rng(7)
    config = small_config(rng, dropout=0.0)
    net_a = nn.init_network(config, rng)
    net_b = nn.init_network(config, rng)
    x = rng.normal(size=(config.input_dim, 4))
    out, cache = nn.forward(net_a, x)
    with pytest.raises(nn.StaleCacheError):
        nn.backward(net_b, cache, np.zeros_like(out))


def test_zero_loss_gradient_gives_zero_parameter_gradients():
    rng = np.random.default_rng(8)
    config = small_config(rng, dropout=0.3)
    net = nn.init_network(config, rng)
    x = rng.normal(size=(config.input_dim, 6))
    out, cache = nn.forward(net, x, mode="train", rng=rng)
    grads = nn.backward(net, cache, np.zeros_like(out))
    assert all(not np.any(g) for g in grads.as_list())
    assert not np.any(grads.d_input)


def test_single_linear_layer_hand_gradient():
    # Pass-through hidden layer (identity weights, positive inputs, no
    # dropout) reduces the stack to sigmoid(W x + b); the weight gradient of
    # the squared loss is then (2/n) * (out - y) * out(1-out) @ x^T by hand.
    config = nn.NetworkConfig(input_dim=3, output_dim=2, n_layers=1, n_neurons=3,
                              dropout_rate=0.0, learning_rate=1e-3,
                              output_activation="sigmoid")
    rng = np.random.default_rng(9)
    net = nn.init_network(config, rng)
    net.weights[0][:] = np.eye(3)
    net.biases[0][:] = 0.0
    x = rng.uniform(0.5, 2.0, size=(3, 8))
    y = rng.uniform(0.1, 0.9, size=(2, 8))
    out, cache = nn.forward(net, x)
    loss_grad = 2.0 * (out - y) / out.size
    grads = nn.backward(net, cache, loss_grad)
    hand = (loss_grad * out * (1.0 - out)) @ x.T
    assert float(np.max(np.abs(grads.d_weights[1] - hand))) < 1e-12


def relative_error(a, b):
    num = np.abs(a - b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(num / den))


def run_gradient_check(seed):
    """One randomized finite-difference check; returns the worst rel error."""
    rng = np.random.default_rng(seed)
    config = small_config(rng)
    n_batch = int(rng.integers(2, 9))
    x = rng.normal(size=(config.input_dim, n_batch))
    mask_seed = int(rng.integers(0, 2**32))
    net = sample_net_away_from_kinks(config, rng, x, mask_seed)
    if config.output_activation == "sigmoid":
        y = (rng.random(size=(config.output_dim, n_batch)) < 0.5).astype(float)

        def loss_of(out):
            return nn.bce_loss(out, y)
    else:
        y = rng.uniform(-0.8, 0.8, size=(config.output_dim, n_batch))

        def loss_of(out):
            return (float(np.mean((out - y) ** 2)),
                    2.0 * (out - y) / out.size)

    def loss_value(_=None):
        out, _cache = nn.forward(net, x, mode="train",
                                 rng=np.random.default_rng(mask_seed))
        return loss_of(out)[0]

    out, cache = nn.forward(net, x, mode="train",
                            rng=np.random.default_rng(mask_seed))
    _, loss_grad = loss_of(out)
    grads = nn.backward(net, cache, loss_grad)

    worst = 0.0
    for param, grad in zip(net.parameters(), grads.as_list()):
        fd = oracles.numeric_gradient(loss_value, param)
        worst = max(worst, relative_error(fd, grad))
    fd_input = oracles.numeric_gradient(loss_value, x)
    worst = max(worst, relative_error(fd_input, grads.d_input))
    return worst


def test_gradients_match_finite_differences():
    for seed in range(12):
        assert run_gradient_check(1000 + seed) < 1e-4


# --- losses ------------------------------------------------------------------

def test_bce_perfect_prediction_is_tiny():
    y = np.array([[0.0, 1.0, 1.0, 0.0]])
    loss, _ = nn.bce_loss(y.copy(), y)
    assert loss <= 1e-6


def test_bce_at_half_is_ln2():
    y = np.array([[0.0, 1.0, 1.0, 0.0, 1.0]])
    loss, _ = nn.bce_loss(np.full_like(y, 0.5), y)
    assert abs(loss - math.log(2.0)) < 1e-12


def test_bce_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    pred = rng.uniform(0.05, 0.95, size=(1, 12))
    y = (rng.random(size=(1, 12)) < 0.5).astype(float)
    _, grad = nn.bce_loss(pred, y)
    fd = oracles.numeric_gradient(lambda p: nn.bce_loss(p, y)[0], pred, step=1e-7)
    assert float(np.max(np.abs(fd - grad))) < 1e-6


def test_bce_gradient_is_zero_in_clamped_region():
    pred = np.array([[1e-9, 1.0 - 1e-9, 0.5]])
    y = np.array([[1.0, 0.0, 1.0]])
    loss, grad = nn.bce_loss(pred, y)
    assert grad[0, 0] == 0.0
    assert grad[0, 1] == 0.0
    assert grad[0, 2] != 0.0
    assert loss > 10.0  # clamped log(1e-7) terms dominate


def test_bce_rejects_shape_mismatch():
    with pytest.raises(nn.DimensionError):
        nn.bce_loss(np.zeros((1, 3)), np.zeros((1, 4)))


# --- optimizer ---------------------------------------------------------------

def test_adam_first_step_magnitude_is_learning_rate():
    w = np.array([1.0, -2.0, 0.5])
    state = nn.AdamState([w])
    nn.adam_step(state, [w], [np.array([2.0, -40.0, 1e-3])], lr=0.05)
    # first bias-corrected step is lr * sign(gradient) regardless of scale
    assert np.allclose(w, [1.0 - 0.05, -2.0 + 0.05, 0.5 - 0.05], atol=1e-6)


def test_adam_hand_computed_first_step_scalar():
    w = np.array([1.0])
    state = nn.AdamState([w])
    nn.adam_step(state, [w], [np.array([2.0])], lr=0.05)
    # m-hat = 2, v-hat = 4 -> step = lr * 2 / (2 + 1e-8)
    assert abs(w[0] - (1.0 - 0.05 * 2.0 / (2.0 + 1e-8))) < 1e-15


def test_adam_zero_gradient_keeps_parameters_and_decays_moments():
    w = np.array([3.0])
    state = nn.AdamState([w])
    nn.adam_step(state, [w], [np.array([1.0])], lr=0.01)
    w_after_first = w.copy()
    m_before, v_before = state.m[0].copy(), state.v[0].copy()
    nn.adam_step(state, [w], [np.array([0.0])], lr=0.0)
    assert np.array_equal(w, w_after_first)
    assert state.m[0][0] == pytest.approx(m_before[0] * 0.9)
    assert state.v[0][0] == pytest.approx(v_before[0] * 0.999)


def test_adam_minimizes_scalar_quadratic():
    w = np.array([1.0])
    state = nn.AdamState([w])
    for _ in range(500):
        nn.adam_step(state, [w], [2.0 * w], lr=0.05)
    assert abs(float(w[0])) < 1e-3


def test_adam_rejects_mismatched_shapes():
    w = np.array([1.0, 2.0])
    state = nn.AdamState([w])
    with pytest.raises(nn.DimensionError):
        nn.adam_step(state, [w], [np.zeros(3)], lr=0.01)


# --- determinism and serialization -------------------------------------------

def train_few_steps(seed):
    rng = np.random.default_rng(seed)
    config = nn.NetworkConfig(input_dim=4, output_dim=1, n_layers=2, n_neurons=8,
                              dropout_rate=0.25, learning_rate=1e-2,
                              output_activation="sigmoid")
    net = nn.init_network(config, rng)
    state = nn.AdamState(net.parameters())
    x = np.random.default_rng(123).normal(size=(4, 16))
    y = (np.random.default_rng(124).random(size=(1, 16)) < 0.5).astype(float)
    for _ in range(5):
        out, cache = nn.forward(net, x, mode="train", rng=rng)
        _, grad = nn.bce_loss(out, y)
        grads = nn.backward(net, cache, grad)
        nn.adam_step(state, net.parameters(), grads.as_list(), config.learning_rate)
    return net


def test_training_trajectory_is_deterministic():
    net_a = train_few_steps(77)
    net_b = train_few_steps(77)
    for wa, wb in zip(net_a.parameters(), net_b.parameters()):
        assert np.array_equal(wa, wb)


def test_serialization_round_trip_is_exact():
    rng = np.random.default_rng(11)
    config = small_config(rng)
    net = nn.init_network(config, rng, seed=11)
    net.weights[0][0, 0] = 1.0 / 3.0  # value without a short decimal form
    doc = json.loads(json.dumps(nn.net_to_doc(net)))
    back = nn.net_from_doc(doc)
    assert back.config == net.config
    assert back.seed == 11
    for wa, wb in zip(net.parameters(), back.parameters()):
        assert np.array_equal(wa, wb)
    x = rng.normal(size=(config.input_dim, 5))
    out_a, _ = nn.forward(net, x)
    out_b, _ = nn.forward(back, x)
    assert np.array_equal(out_a, out_b)
