"""Local models and client-side training.

Models are kept as flat float64 parameter vectors so that client updates,
aggregation rules, and diagnostics all operate on plain arrays.  Two model
families are supported:

* multinomial logistic regression (``hidden=None``), layout
  ``[W (F*C, row-major), b (C)]``;
* one-hidden-layer tanh MLP (``hidden=H``), layout
  ``[W1 (F*H), b1 (H), W2 (H*C), b2 (C)]``.

``local_train`` runs plain mini-batch SGD with classical momentum on the
softmax cross-entropy loss and returns the parameter delta
``trained - start``.  Momentum buffers live and die inside a single call:
clients are stateless between rounds.  An update vector is just a flat
float64 ndarray with the same layout as the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


class DivergenceError(RuntimeError):
    """Raised when training or aggregation produces non-finite parameters."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    momentum: float = 0.9
    epochs: int = 1
    batch_size: int = 32

    def __post_init__(self) -> None:
        # learning_rate == 0 is allowed: it yields a zero update, which is
        # useful for smoke checks.
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ModelParams:
    """Flat parameter vector plus the shape metadata needed to unpack it."""

    flat: np.ndarray
    num_features: int
    num_classes: int
    hidden: int | None = None

    def __post_init__(self) -> None:
        expected = model_dim(self.num_features, self.num_classes, self.hidden)
        if self.flat.shape != (expected,):
            raise ValueError(
                f"parameter vector has length {self.flat.shape}, expected ({expected},)"
            )

    @property
    def dim(self) -> int:
        return self.flat.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.flat.copy(), self.num_features, self.num_classes, self.hidden)


def model_dim(num_features: int, num_classes: int, hidden: int | None) -> int:
    """Total parameter count for the given architecture."""
    if hidden is None:
        return num_features * num_classes + num_classes
    return (
        num_features * hidden
        + hidden
        + hidden * num_classes
        + num_classes
    )


def init_model(
    num_features: int,
    num_classes: int,
    hidden: int | None = None,
    seed: int = 0,
) -> ModelParams:
    """Small deterministic random init: weights ~ N(0, 1/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(model_dim(num_features, num_classes, hidden))
    if hidden is None:
        w = rng.standard_normal((num_features, num_classes)) / np.sqrt(num_features)
        flat[: num_features * num_classes] = w.ravel()
    else:
        w1 = rng.standard_normal((num_features, hidden)) / np.sqrt(num_features)
        w2 = rng.standard_normal((hidden, num_classes)) / np.sqrt(hidden)
        off = num_features * hidden
        flat[:off] = w1.ravel()
        flat[off + hidden : off + hidden + hidden * num_classes] = w2.ravel()
    return ModelParams(flat, num_features, num_classes, hidden)


def _unpack(flat: np.ndarray, f: int, c: int, h: int | None):
    """Views into the flat vector, in layout order."""
    if h is None:
        w = flat[: f * c].reshape(f, c)
        b = flat[f * c :]
        return w, b
    o1 = f * h
    o2 = o1 + h
    o3 = o2 + h * c
    return (
        flat[:o1].reshape(f, h),
        flat[o1:o2],
        flat[o2:o3].reshape(h, c),
        flat[o3:],
    )


def predict_logits(params: ModelParams, features: np.ndarray) -> np.ndarray:
    if params.hidden is None:
        w, b = _unpack(params.flat, params.num_features, params.num_classes, None)
        return features @ w + b
    w1, b1, w2, b2 = _unpack(
        params.flat, params.num_features, params.num_classes, params.hidden
    )
    return np.tanh(features @ w1 + b1) @ w2 + b2


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(params: ModelParams, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy on the given batch."""
    logp = _log_softmax(predict_logits(params, features))
    return float(-logp[np.arange(len(labels)), labels].mean())


def loss_and_grad(
    params: ModelParams, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its analytic gradient as a flat vector."""
    f, c, h = params.num_features, params.num_classes, params.hidden
    n = len(labels)
    grad = np.empty_like(params.flat)
    if h is None:
        w, b = _unpack(params.flat, f, c, None)
        logits = features @ w + b
        logp = _log_softmax(logits)
        probs = np.exp(logp)
        probs[np.arange(n), labels] -= 1.0
        probs /= n
        gw, gb = _unpack(grad, f, c, None)
        np.matmul(features.T, probs, out=gw)
        gb[:] = probs.sum(axis=0)
    else:
        w1, b1, w2, b2 = _unpack(params.flat, f, c, h)
        hidden_act = np.tanh(features @ w1 + b1)
        logits = hidden_act @ w2 + b2
        logp = _log_softmax(logits)
        probs = np.exp(logp)
        probs[np.arange(n), labels] -= 1.0
        probs /= n
        g1, gb1, g2, gb2 = _unpack(grad, f, c, h)
        np.matmul(hidden_act.T, probs, out=g2)
        gb2[:] = probs.sum(axis=0)
        back = (probs @ w2.T) * (1.0 - hidden_act**2)
        np.matmul(features.T, back, out=g1)
        gb1[:] = back.sum(axis=0)
    value = float(-logp[np.arange(n), labels].mean())
    return value, grad


def local_train(
    start: ModelParams, shard: Dataset, cfg: TrainConfig, seed: int
) -> np.ndarray:
    """Train locally and return the update vector ``trained - start``.

    Runs ``cfg.epochs`` passes of mini-batch SGD with classical momentum
    (v <- mu*v + g; p <- p - lr*v), batch order shuffled from ``seed``.
    Raises DivergenceError as soon as any parameter becomes non-finite.
    """
    if shard.num_features != start.num_features:
        raise ValueError("shard feature width does not match the model")
    flat = start.flat.copy()
    working = ModelParams(flat, start.num_features, start.num_classes, start.hidden)
    velocity = np.zeros_like(flat)
    rng = np.random.default_rng(seed)
    n = len(shard)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            _, grad = loss_and_grad(working, shard.features[batch], shard.labels[batch])
            velocity *= cfg.momentum
            velocity += grad
            flat -= cfg.learning_rate * velocity
            if not np.all(np.isfinite(flat)):
                raise DivergenceError("local training produced non-finite parameters")
    return flat - start.flat


def apply_update(params: ModelParams, update: np.ndarray) -> ModelParams:
    """Pure vector addition of an update onto the parameters."""
    if update.shape != params.flat.shape:
        raise ValueError("update length does not match the model")
    return ModelParams(
        params.flat + update, params.num_features, params.num_classes, params.hidden
    )


def evaluate(params: ModelParams, ds: Dataset) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    preds = np.argmax(predict_logits(params, ds.features), axis=1)
    return float((preds == ds.labels).mean())
