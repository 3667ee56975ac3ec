"""Feed-forward confidence network with a non-negative evidence head.

The network maps standardized features through ``hidden_dims`` layers
(tanh or ReLU) to a final affine layer followed by a ReLU, so every output
is a valid evidence value. Training minimizes the batch-mean adjusted MSE
of ``Dir(evidence + 1)`` against the target label distributions, using
the closed-form gradient from :mod:`cdlearn.dirichlet`.

The same machinery with ``head="softmax"`` trains a plain LDL regressor on
squared error; it backs the naive comparison baseline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from .core import DimensionError, EvidenceVector, ValidationError
from .dirichlet import DirichletParams, amse_grad_batch, amse_loss_batch

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss = {loss!r}")
        self.epoch = epoch
        self.loss = loss


def default_hidden(c: int) -> tuple[int, ...]:
    return (max(64, 4 * c),)


@dataclass
class NetworkConfig:
    input_dim: int
    output_dim: int
    hidden_dims: Optional[tuple[int, ...]] = None
    hidden_activation: Literal["tanh", "relu"] = "tanh"
    head: Literal["relu", "softmax"] = "relu"
    seed: int = 0
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 32
    optimizer: Literal["adam", "sgd"] = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    # stop after this many epochs without a relative loss improvement of
    # early_stopping_tol; None disables
    early_stopping: Optional[int] = None
    early_stopping_tol: float = 1e-6
    standardize: bool = True

    def __post_init__(self):
        if self.hidden_dims is None:
            self.hidden_dims = default_hidden(self.output_dim)
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.validate()

    def validate(self) -> None:
        dims = (self.input_dim, self.output_dim, *self.hidden_dims)
        if any(int(d) < 1 for d in dims):
            raise ValidationError(f"all layer widths must be >= 1, got {dims}")
        if self.hidden_activation not in ("tanh", "relu"):
            raise ValidationError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.head not in ("relu", "softmax"):
            raise ValidationError(f"unknown head {self.head!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if self.early_stopping is not None and self.early_stopping < 1:
            raise ValidationError("early_stopping patience must be >= 1")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)


@dataclass
class ConfidenceModel:
    config: NetworkConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    history: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        dims = self.config.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DimensionError(f"expected {len(dims) - 1} layers for dims {dims}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise DimensionError(
                    f"layer {i}: weight {W.shape} / bias {b.shape} do not chain "
                    f"{dims[i]} -> {dims[i + 1]}")
        if self.feature_mean.shape != (dims[0],) or self.feature_scale.shape != (dims[0],):
            raise DimensionError("standardization statistics do not match input_dim")

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "ConfidenceModel":
        return ConfidenceModel(self.config, [W.copy() for W in self.weights],
                               [b.copy() for b in self.biases], self.feature_mean.copy(),
                               self.feature_scale.copy(), list(self.history))


def init_model(config: NetworkConfig, rng: np.random.Generator,
               feature_mean=None, feature_scale=None) -> ConfidenceModel:
    """Glorot-uniform weights and zero biases."""
    dims = config.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    m = config.input_dim
    mean = np.zeros(m) if feature_mean is None else np.asarray(feature_mean, dtype=float)
    scale = np.ones(m) if feature_scale is None else np.asarray(feature_scale, dtype=float)
    return ConfidenceModel(config, weights, biases, mean, scale)


def _check_features(model: ConfidenceModel, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionError(f"expected {model.input_dim} features, got shape {np.shape(X)}")
    return X, single


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def _forward_cache(model: ConfidenceModel, X: np.ndarray):
    """Return (layer inputs, pre-activations, output) for a standardized batch."""
    act = model.config.hidden_activation
    h = (X - model.feature_mean) / model.feature_scale
    inputs, pre = [], []
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        z = h @ W + b
        pre.append(z)
        if i < last:
            h = _activate(z, act)
    out = _softmax(z) if model.config.head == "softmax" else np.maximum(z, 0.0)
    return inputs, pre, out


def forward_batch(model: ConfidenceModel, X) -> np.ndarray:
    X, _ = _check_features(model, X)
    return _forward_cache(model, X)[2]


def forward(model: ConfidenceModel, x) -> EvidenceVector:
    """Evidence for a single feature vector (ReLU head only)."""
    X, single = _check_features(model, x)
    if not single:
        raise DimensionError("forward takes one feature vector; use forward_batch for matrices")
    if model.config.head != "relu":
        raise ValidationError("forward yields evidence only for a ReLU-head model")
    return EvidenceVector(_forward_cache(model, X)[2][0])


def predict_alpha(model: ConfidenceModel, x) -> DirichletParams:
    return DirichletParams(forward(model, x).values + 1.0)


def _loss_and_output_grad(model: ConfidenceModel, out: np.ndarray, Y: np.ndarray):
    """Per-row loss and d(mean loss)/d(out) for the model's head."""
    n = out.shape[0]
    if model.config.head == "relu":
        alpha = out + 1.0
        return amse_loss_batch(alpha, Y), amse_grad_batch(alpha, Y) / n
    losses = np.sum((Y - out) ** 2, axis=1)
    return losses, 2.0 * (out - Y) / n


def _backprop(model: ConfidenceModel, X: np.ndarray, Y: np.ndarray):
    inputs, pre, out = _forward_cache(model, X)
    losses, d_out = _loss_and_output_grad(model, out, Y)
    if model.config.head == "relu":
        # subgradient of ReLU at exactly 0 is 0
        dz = d_out * (pre[-1] > 0)
    else:
        dz = out * (d_out - np.sum(d_out * out, axis=1, keepdims=True))
    act = model.config.hidden_activation
    grads_W = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_W[i] = inputs[i].T @ dz
        grads_b[i] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ model.weights[i].T
            if act == "tanh":
                dz = dh * (1.0 - inputs[i] ** 2)
            else:
                dz = dh * (pre[i - 1] > 0)
    return losses, grads_W, grads_b


def backward(model: ConfidenceModel, X, Y) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the batch-mean loss with respect to every weight and bias.

    Accepts a single ``(x, y)`` pair or matrices of rows.
    """
    X, _ = _check_features(model, X)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape != (X.shape[0], model.output_dim):
        raise DimensionError(f"targets have shape {Y.shape}, expected ({X.shape[0]}, {model.output_dim})")
    _, gW, gb = _backprop(model, X, Y)
    return gW, gb


def mean_loss(model: ConfidenceModel, X, Y) -> float:
    X, _ = _check_features(model, X)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    out = _forward_cache(model, X)[2]
    return float(np.mean(_loss_and_output_grad(model, out, Y)[0]))


class _Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(X, Y, config: NetworkConfig) -> ConfidenceModel:
    """Fit a network to ``(X, Y)``; Y rows are label distributions of width ``output_dim``.

    Deterministic given ``config.seed``: initialization and per-epoch
    shuffling both come from one seeded generator. ``history`` records the
    full-training-set mean loss after every epoch.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise DimensionError(f"features have shape {X.shape}, expected (n, {config.input_dim})")
    if Y.ndim != 2 or Y.shape != (X.shape[0], config.output_dim):
        raise DimensionError(f"targets have shape {Y.shape}, expected ({X.shape[0]}, {config.output_dim})")
    config.validate()
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)

    if config.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    model = init_model(config, rng, mean, scale)
    params = model.parameters()
    if config.optimizer == "adam":
        opt = _Adam(params, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    else:
        opt = _SGD(config.learning_rate)

    # overflow is expected once training blows up; it surfaces as DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        _fit_epochs(model, X, Y, config, rng, opt)
    return model


def _fit_epochs(model, X, Y, config, rng, opt) -> None:
    n = X.shape[0]
    params = model.parameters()
    batch = min(config.batch_size, n)
    best, stale = np.inf, 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            _, gW, gb = _backprop(model, X[idx], Y[idx])
            grads = []
            for W, g_w, g_b in zip(model.weights, gW, gb):
                if config.weight_decay:
                    g_w = g_w + config.weight_decay * W
                grads += [g_w, g_b]
            opt.step(params, grads)
        loss = mean_loss(model, X, Y)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        model.history.append((epoch, loss))
        if config.early_stopping is not None:
            if loss < best * (1.0 - config.early_stopping_tol):
                best, stale = loss, 0
            else:
                stale += 1
                if stale >= config.early_stopping:
                    logger.info("early stop at epoch %d (loss %.6g)", epoch, loss)
                    break


# Serialization. Python's float repr is the shortest string that round-trips,
# so weights reload bit-exactly.

def model_to_dict(model: ConfidenceModel) -> dict:
    cfg = asdict(model.config)
    cfg["hidden_dims"] = list(cfg["hidden_dims"])
    return {
        "format": "cdlearn-confidence-model",
        "version": FORMAT_VERSION,
        "config": cfg,
        "layers": [
            {"shape": list(W.shape), "weight": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in zip(model.weights, model.biases)
        ],
        "feature_mean": model.feature_mean.tolist(),
        "feature_scale": model.feature_scale.tolist(),
        "history": [[e, l] for e, l in model.history],
    }


def model_from_dict(d: dict) -> ConfidenceModel:
    if d.get("format") != "cdlearn-confidence-model":
        raise ValidationError("not a confidence model file")
    cfg = dict(d["config"])
    cfg["hidden_dims"] = tuple(cfg["hidden_dims"])
    config = NetworkConfig(**cfg)
    weights, biases = [], []
    for layer in d["layers"]:
        shape = tuple(layer["shape"])
        weights.append(np.array(layer["weight"], dtype=float).reshape(shape))
        biases.append(np.array(layer["bias"], dtype=float))
    return ConfidenceModel(config, weights, biases,
                           np.array(d["feature_mean"], dtype=float),
                           np.array(d["feature_scale"], dtype=float),
                           [(int(e), float(l)) for e, l in d.get("history", [])])


def save_model(model: ConfidenceModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> ConfidenceModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
