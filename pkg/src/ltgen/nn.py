"""Minimal dense neural-network engine on numpy.

Forward/backward passes for fully connected stacks with leaky-rectifier
hidden units, inverted dropout, binary cross-entropy, and Adam. Batches are
column-major: an input of shape (input_dim, n_batch). Gradients are exact
under the sampled dropout masks, which makes the whole engine checkable
against finite differences.
"""
import math
from dataclasses import dataclass, field

import numpy as np

LEAKY_SLOPE = 0.2
BCE_EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class DimensionError(ValueError):
    """Batch or parameter shapes do not chain."""


class StaleCacheError(ValueError):
    """Backward called with a cache from a different network/forward call."""


@dataclass(frozen=True)
class NetworkConfig:
    """Shape and training hyperparameters of one dense network.

    n_layers counts hidden layers; every hidden layer is n_neurons wide.
    """
    input_dim: int
    output_dim: int
    n_layers: int
    n_neurons: int
    dropout_rate: float
    learning_rate: float
    output_activation: str  # "tanh" | "sigmoid"

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_neurons < 1:
            raise ValueError(f"n_neurons must be >= 1, got {self.n_neurons}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not (self.learning_rate > 0.0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.output_activation not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.n_neurons] * self.n_layers + [self.output_dim]


class DenseNet:
    """Weights/biases of a dense stack plus its configuration.

    weights[l] has shape (fan_out, fan_in); biases[l] has shape (fan_out, 1).
    mode selects dropout behaviour when forward() is not given an override.
    """

    def __init__(self, config: NetworkConfig, weights: list[np.ndarray],
                 biases: list[np.ndarray], seed: int | None = None):
        sizes = config.layer_sizes()
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise DimensionError("wrong number of layers")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1], 1):
                raise DimensionError(
                    f"layer {l} shapes {w.shape}/{b.shape} do not chain with {sizes}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} parameters are not finite")
        self.config = config
        self.weights = weights
        self.biases = biases
        self.seed = seed
        self.mode = "eval"

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...] (aliases, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "DenseNet":
        net = DenseNet(self.config, [w.copy() for w in self.weights],
                       [b.copy() for b in self.biases], seed=self.seed)
        net.mode = self.mode
        return net


def init_network(config: NetworkConfig, rng: np.random.Generator,
                 seed: int | None = None) -> DenseNet:
    """Initialize weights uniformly in +-1/sqrt(fan_in); biases at zero."""
    sizes = config.layer_sizes()
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros((fan_out, 1)))
    return DenseNet(config, weights, biases, seed=seed)


def leaky_relu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def _leaky_relu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, 1.0, LEAKY_SLOPE)


def _head(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    # numerically stable logistic
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _head_grad(y: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - y * y
    return y * (1.0 - y)


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward()."""
    net_id: int
    mode: str
    inputs: list[np.ndarray] = field(default_factory=list)   # input to each layer
    pre_acts: list[np.ndarray] = field(default_factory=list)  # z = W a + b
    masks: list = field(default_factory=list)                 # dropout (hidden only)
    output: np.ndarray | None = None


def forward(net: DenseNet, batch: np.ndarray, mode: str | None = None,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a (input_dim, n_batch) column batch.

    Train mode draws fresh inverted-dropout masks for the hidden activations
    from `rng`; eval mode is deterministic and consumes no randomness.
    """
    mode = net.mode if mode is None else mode
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] != net.config.input_dim:
        raise DimensionError(
            f"batch shape {batch.shape} incompatible with input_dim {net.config.input_dim}"
        )
    rate = net.config.dropout_rate
    use_dropout = mode == "train" and rate > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    cache = ForwardCache(net_id=id(net), mode=mode)
    a = batch
    n_hidden = len(net.weights) - 1
    for l in range(n_hidden):
        cache.inputs.append(a)
        z = net.weights[l] @ a + net.biases[l]
        cache.pre_acts.append(z)
        a = leaky_relu(z)
        if use_dropout:
            mask = (rng.random(size=a.shape) >= rate) / (1.0 - rate)
            a = a * mask
            cache.masks.append(mask)
        else:
            cache.masks.append(None)
    cache.inputs.append(a)
    z = net.weights[-1] @ a + net.biases[-1]
    cache.pre_acts.append(z)
    out = _head(z, net.config.output_activation)
    cache.output = out
    return out, cache


@dataclass
class Gradients:
    """Parameter gradients plus the gradient w.r.t. the input batch."""
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        out = []
        for dw, db in zip(self.d_weights, self.d_biases):
            out.append(dw)
            out.append(db)
        return out


def backward(net: DenseNet, cache: ForwardCache, loss_grad: np.ndarray) -> Gradients:
    """Backpropagate dL/d_output through the cached forward pass."""
    if cache.net_id != id(net) or len(cache.pre_acts) != len(net.weights):
        raise StaleCacheError("cache does not belong to this network")
    loss_grad = np.asarray(loss_grad, dtype=float)
    if loss_grad.shape != cache.output.shape:
        raise DimensionError(
            f"loss gradient shape {loss_grad.shape} != output shape {cache.output.shape}"
        )
    d_weights = [None] * len(net.weights)
    d_biases = [None] * len(net.weights)

    delta = loss_grad * _head_grad(cache.output, net.config.output_activation)
    d_weights[-1] = delta @ cache.inputs[-1].T
    d_biases[-1] = delta.sum(axis=1, keepdims=True)
    upstream = net.weights[-1].T @ delta
    for l in range(len(net.weights) - 2, -1, -1):
        if cache.masks[l] is not None:
            upstream = upstream * cache.masks[l]
        delta = upstream * _leaky_relu_grad(cache.pre_acts[l])
        d_weights[l] = delta @ cache.inputs[l].T
        d_biases[l] = delta.sum(axis=1, keepdims=True)
        upstream = net.weights[l].T @ delta
    return Gradients(d_weights=d_weights, d_biases=d_biases, d_input=upstream)


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Binary cross-entropy, mean over every element of the batch.

    Predictions are clamped to [1e-7, 1 - 1e-7]; the gradient is zero where
    the clamp is active, consistent with the clamped forward value.
    """
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape:
        raise DimensionError(
            f"predictions {predictions.shape} vs labels {labels.shape}"
        )
    clamped = np.clip(predictions, BCE_EPS, 1.0 - BCE_EPS)
    n = predictions.size
    loss = float(-np.sum(labels * np.log(clamped)
                         + (1.0 - labels) * np.log1p(-clamped)) / n)
    grad = (clamped - labels) / (clamped * (1.0 - clamped) * n)
    grad = np.where(predictions == clamped, grad, 0.0)
    return loss, grad


class AdamState:
    """First/second moment accumulators for one parameter list."""

    def __init__(self, params: list[np.ndarray], beta1: float = ADAM_BETA1,
                 beta2: float = ADAM_BETA2, eps: float = ADAM_EPS):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray], lr: float) -> list[np.ndarray]:
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise DimensionError("parameter/gradient lists do not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


def net_to_doc(net: DenseNet) -> dict:
    """Portable (JSON-ready) description of a network; exact round trip."""
    return {
        "config": {
            "input_dim": net.config.input_dim,
            "output_dim": net.config.output_dim,
            "n_layers": net.config.n_layers,
            "n_neurons": net.config.n_neurons,
            "dropout_rate": net.config.dropout_rate,
            "learning_rate": net.config.learning_rate,
            "output_activation": net.config.output_activation,
        },
        "layer_shapes": [list(w.shape) for w in net.weights],
        "activations": ["leaky_relu"] * (len(net.weights) - 1)
                       + [net.config.output_activation],
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.ravel().tolist() for b in net.biases],
        "seed": net.seed,
    }


def net_from_doc(doc: dict) -> DenseNet:
    config = NetworkConfig(**doc["config"])
    weights = [np.array(w, dtype=float) for w in doc["weights"]]
    biases = [np.array(b, dtype=float).reshape(-1, 1) for b in doc["biases"]]
    for w, shape in zip(weights, doc["layer_shapes"]):
        if list(w.shape) != list(shape):
            raise DimensionError(f"stored shape {shape} != array shape {w.shape}")
    return DenseNet(config, weights, biases, seed=doc.get("seed"))
