"""Dense-network training core.

Minimal float64 building blocks: an MLP with ReLU hidden layers and raw
logit outputs, cross-entropy against arbitrary probability targets
("target vectors"), exact backpropagation, SGD with optional Nesterov
momentum and weight decay, and a milestone step schedule for the learning
rate. Arrays are plain numpy ndarrays throughout; a target vector is a
length-L probability distribution and losses are averaged over the batch.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

ACTIVATIONS = ("relu", "none")


@dataclass
class Layer:
    """One affine layer: ``out = act(x @ weight + bias)``."""

    weight: np.ndarray  # fan_in x fan_out
    bias: np.ndarray  # fan_out
    activation: str = "none"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(
                "layer needs a (fan_in, fan_out) weight and a matching bias, got "
                f"{self.weight.shape} / {self.bias.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass
class Model:
    """Feed-forward layer stack; the final layer must emit raw logits."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ShapeError(
                    f"layer dims do not chain: {prev.weight.shape} -> {nxt.weight.shape}"
                )
        if self.layers[-1].activation != "none":
            raise ConfigError("final layer must have activation 'none' (raw logits)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(l.weight.shape[1] for l in self.layers)


@dataclass(frozen=True)
class ModelSnapshot:
    """Frozen copy of a model's parameters, tagged with the epoch it was taken at."""

    model: Model
    epoch: int | None = None


@dataclass(frozen=True)
class OptimHyper:
    """SGD hyper-parameters plus the milestone step schedule."""

    base_lr: float
    milestones: tuple[int, ...] = ()
    gamma: float = 1.0
    weight_decay: float = 0.0
    momentum: float = 0.0
    nesterov: bool = False

    def __post_init__(self):
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))
        if self.base_lr <= 0:
            raise ConfigError("base_lr must be positive")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ConfigError(f"milestones must be strictly ascending: {self.milestones}")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must be in (0, 1]")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")


def init_model(dims, rng) -> Model:
    """Build an MLP with the given layer widths.

    Hidden layers use ReLU, the last layer is linear. Weights are drawn
    uniformly from +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"need at least input and output widths, all positive: {dims}")
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        act = "none" if i == len(dims) - 2 else "relu"
        layers.append(Layer(weight, np.zeros(fan_out), act))
    return Model(layers)


def _check_inputs(model: Model, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"inputs must be a 2-D batch, got shape {x.shape}")
    if x.shape[1] != model.input_dim:
        raise ShapeError(f"input dim {x.shape[1]} != model input dim {model.input_dim}")
    return x


def _forward_cached(model: Model, x: np.ndarray):
    """Forward pass keeping pre-activations and activations for backprop."""
    pres, acts = [], [x]
    for layer in model.layers:
        z = acts[-1] @ layer.weight + layer.bias
        pres.append(z)
        acts.append(np.maximum(z, 0.0) if layer.activation == "relu" else z)
    return pres, acts


def forward(model: Model, inputs) -> np.ndarray:
    """Raw logits for a batch of inputs (B x input_dim -> B x output_dim)."""
    x = _check_inputs(model, inputs)
    return _forward_cached(model, x)[1][-1]


def soft_ce(logits, targets):
    """Cross-entropy of softmax(logits) against probability targets.

    Returns ``(loss, grad_logits)`` where the loss is the batch mean of
    -sum_c t_c * log softmax(z)_c and grad_logits = (softmax(z) - t) / B.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ShapeError(f"logits must be a non-empty 2-D batch, got shape {z.shape}")
    if t.shape != z.shape:
        raise ShapeError(f"targets shape {t.shape} != logits shape {z.shape}")
    if not np.isfinite(z).all():
        raise NumericError("non-finite logits")
    shifted = z - z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    batch = z.shape[0]
    loss = -(t * log_probs).sum() / batch
    grad = (np.exp(log_probs) - t) / batch
    return loss, grad


def loss_and_grads(model: Model, inputs, targets):
    """Loss, parameter gradients, and logits in one pass."""
    x = _check_inputs(model, inputs)
    pres, acts = _forward_cached(model, x)
    loss, delta = soft_ce(acts[-1], targets)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ model.layers[i].weight.T
            if model.layers[i - 1].activation == "relu":
                delta = delta * (pres[i - 1] > 0)
    return loss, grads, acts[-1]


def backward(model: Model, inputs, targets):
    """Gradients of the mean soft-target cross-entropy w.r.t. every weight and bias."""
    return loss_and_grads(model, inputs, targets)[1]


def sgd_step(model: Model, grads, hyper: OptimHyper, lr: float, velocity=None):
    """One SGD update, in place.

    With decayed gradient d = g + weight_decay * w:
    v <- momentum * v + d, then w <- w - lr * (d + momentum * v) under
    Nesterov, else w <- w - lr * v (heavy ball). ``velocity`` is a list of
    per-layer (vw, vb) arrays, created on first use and updated in place so
    it persists across steps.
    """
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    if velocity is None:
        velocity = []
    if not velocity:
        velocity.extend(
            (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
        )
    mu = hyper.momentum
    for layer, (gw, gb), (vw, vb) in zip(model.layers, grads, velocity):
        dw = gw + hyper.weight_decay * layer.weight
        db = gb + hyper.weight_decay * layer.bias
        vw *= mu
        vw += dw
        vb *= mu
        vb += db
        if hyper.nesterov:
            layer.weight -= lr * (dw + mu * vw)
            layer.bias -= lr * (db + mu * vb)
        else:
            layer.weight -= lr * vw
            layer.bias -= lr * vb
    return model, velocity


def lr_at_epoch(hyper: OptimHyper, epoch: int) -> float:
    """base_lr * gamma^(number of milestones <= epoch).

    The power is taken in decimal so decayed rates land on the configured
    decimal values (0.1 * 0.2 as binary floats is 0.020000000000000004,
    which would otherwise leak into logs and comparisons).
    """
    decays = bisect_right(hyper.milestones, epoch)
    if decays == 0:
        return float(hyper.base_lr)
    return float(Decimal(repr(hyper.base_lr)) * Decimal(repr(hyper.gamma)) ** decays)


def snapshot(model: Model, epoch: int | None = None) -> ModelSnapshot:
    """Deep-copy the parameters; the copy is marked read-only."""
    frozen = []
    for layer in model.layers:
        w = layer.weight.copy()
        b = layer.bias.copy()
        w.setflags(write=False)
        b.setflags(write=False)
        frozen.append(Layer(w, b, layer.activation))
    return ModelSnapshot(Model(frozen), epoch)


def one_hot(label: int, count: int) -> np.ndarray:
    vec = np.zeros(count)
    vec[label] = 1.0
    return vec


def one_hot_rows(labels, count: int) -> np.ndarray:
    labels = np.asarray(labels)
    rows = np.zeros((labels.shape[0], count))
    rows[np.arange(labels.shape[0]), labels] = 1.0
    return rows


def is_target_vector(vec, tol: float = 1e-9) -> bool:
    """True when entries are non-negative and sum to one within ``tol``."""
    v = np.asarray(vec, dtype=np.float64)
    return bool(v.ndim == 1 and (v >= 0).all() and abs(v.sum() - 1.0) <= tol)


def train_batches(model: Model, features, batches, hyper: OptimHyper, lr: float, velocity=None):
    """Run SGD over prepared batches and report epoch-mean loss and accuracy.

    ``batches`` yields (index array, integer labels, target-vector matrix);
    accuracy is argmax(logits) == labels, in percent, weighted by batch size.
    """
    if velocity is None:
        velocity = []
    loss_sum = 0.0
    seen = 0
    hit = 0
    for idx, labels, targets in batches:
        x = features[idx]
        loss, grads, logits = loss_and_grads(model, x, targets)
        sgd_step(model, grads, hyper, lr, velocity)
        loss_sum += loss * len(idx)
        seen += len(idx)
        hit += int((logits.argmax(axis=1) == np.asarray(labels)).sum())
    if seen == 0:
        raise ShapeError("no batches to train on")
    return loss_sum / seen, 100.0 * hit / seen
