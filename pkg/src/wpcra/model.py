"""Multinomial logistic regression over flat parameter vectors.

A parameter vector holds one row per class, each row being ``F`` feature
weights followed by a bias, so its length is ``C * (F + 1)``.  Every
aggregation kernel in the package operates on these flat vectors directly,
which means norms, medians and clipping all include the biases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TrainConfig",
    "num_params",
    "zeros",
    "unpack",
    "predict_logits",
    "predict",
    "softmax",
    "softmax_cross_entropy_grad",
    "local_train",
]


@dataclass(frozen=True)
class TrainConfig:
    """Local SGD settings for one client.

    ``batch_size=None`` means full-batch gradient descent, which makes
    :func:`local_train` independent of its random generator.
    """

    learning_rate: float = 0.001
    local_iterations: int = 1
    batch_size: int | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.local_iterations < 1:
            raise ValueError(f"local_iterations must be >= 1, got {self.local_iterations}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be positive or None, got {self.batch_size}")


def num_params(num_features: int, num_classes: int) -> int:
    return num_classes * (num_features + 1)


def zeros(num_features: int, num_classes: int) -> np.ndarray:
    return np.zeros(num_params(num_features, num_classes))


def unpack(params: np.ndarray, num_features: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a flat vector into a ``(C, F)`` weight matrix and ``(C,)`` biases (views)."""
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.size % (num_features + 1) != 0:
        raise ValueError(
            f"parameter vector of length {params.size} does not fit "
            f"{num_features} features plus a bias per class"
        )
    rows = params.reshape(-1, num_features + 1)
    return rows[:, :num_features], rows[:, num_features]


def predict_logits(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Class scores ``W x + b`` for one sample (1-D ``x``) or a batch (2-D ``x``)."""
    x = np.asarray(x, dtype=float)
    W, b = unpack(params, x.shape[-1])
    return x @ W.T + b


def predict(params: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Arg-max class per row; ties go to the lowest class index."""
    return np.argmax(predict_logits(params, X), axis=-1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy_grad(
    params: np.ndarray, X: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over a batch and its gradient w.r.t. ``params``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("cannot compute a loss on an empty batch")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    n, F = X.shape
    logits = predict_logits(params, X)
    C = logits.shape[1]
    if y.min() < 0 or y.max() >= C:
        raise ValueError(f"labels must lie in [0, {C})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    loss = -log_probs[np.arange(n), y].mean()

    resid = np.exp(log_probs)
    resid[np.arange(n), y] -= 1.0
    resid /= n
    grad = np.empty((C, F + 1))
    grad[:, :F] = resid.T @ X
    grad[:, F] = resid.sum(axis=0)
    return float(loss), grad.reshape(-1)


def local_train(
    start: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Run ``cfg.local_iterations`` SGD steps from ``start`` and return the new parameters."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.shape[0] == 0:
        raise ValueError("local dataset is empty")
    w = np.array(start, dtype=float, copy=True)
    n = X.shape[0]
    full = cfg.batch_size is None or cfg.batch_size >= n
    if not full and rng is None:
        raise ValueError("mini-batch training needs a random generator")
    for _ in range(cfg.local_iterations):
        if full:
            _, g = softmax_cross_entropy_grad(w, X, y)
        else:
            idx = rng.choice(n, size=cfg.batch_size, replace=False)
            _, g = softmax_cross_entropy_grad(w, X[idx], y[idx])
        w -= cfg.learning_rate * g
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("local training produced non-finite parameters")
    return w
