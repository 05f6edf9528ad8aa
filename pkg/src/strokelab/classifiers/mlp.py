"""Single-hidden-layer perceptron trained by full-batch gradient descent.

Inputs are standardized internally with training-fold statistics; gradients
use the mean-over-batch convention, so duplicating every row leaves the
gradient unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteLoss, SchemaMismatch, SingleClass
from ..ingest import EncodedMatrix
from .base import ModelSpec, TrainedModel, _scaler

_EPS = 1e-12


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0/1."""
    p = np.clip(p, _EPS, 1.0 - _EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass
class MLPWeights:
    mean: np.ndarray
    sigma: np.ndarray
    w1: np.ndarray  # (d, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 1)
    b2: np.ndarray  # (1,)


def _forward(w: MLPWeights, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = sigmoid(Z @ w.w1 + w.b1)
    prob = sigmoid(hidden @ w.w2 + w.b2).ravel()
    return hidden, prob


def _gradients(w: MLPWeights, Z: np.ndarray, y: np.ndarray):
    """Analytic mean-BCE gradients for all four weight blocks."""
    n = Z.shape[0]
    hidden, prob = _forward(w, Z)
    dz2 = ((prob - y) / n)[:, None]
    gw2 = hidden.T @ dz2
    gb2 = dz2.sum(axis=0)
    dhidden = dz2 @ w.w2.T
    dz1 = dhidden * hidden * (1.0 - hidden)
    gw1 = Z.T @ dz1
    gb1 = dz1.sum(axis=0)
    return gw1, gb1, gw2, gb2, prob


def train_mlp(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    """Train the perceptron; halts early with a warning if the loss trace
    rises over any 50-epoch window.

    Raises:
        SingleClass: training labels contain one class only.
        NonFiniteLoss: the loss diverged to NaN/Inf.
    """
    if len(np.unique(data.y)) < 2:
        raise SingleClass("mlp training needs both classes")
    p = spec.resolved()
    rng = np.random.default_rng(spec.seed & 0xFFFFFFFFFFFFFFFF)
    mean, sigma = _scaler(data.X)
    Z = (data.X - mean) / sigma
    d, h = Z.shape[1], int(p["hidden"])
    scale = float(p["init_scale"])
    w = MLPWeights(
        mean=mean,
        sigma=sigma,
        w1=rng.uniform(-scale, scale, (d, h)),
        b1=rng.uniform(-scale, scale, h),
        w2=rng.uniform(-scale, scale, (h, 1)),
        b2=rng.uniform(-scale, scale, 1),
    )
    lr = float(p["learning_rate"])
    y = data.y.astype(np.float64)
    trace: list[float] = []
    for epoch in range(int(p["epochs"])):
        gw1, gb1, gw2, gb2, prob = _gradients(w, Z, y)
        loss = bce_loss(prob, y)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}")
        trace.append(loss)
        if epoch >= 50 and trace[-1] > trace[-51]:
            warnings.warn(
                f"mlp loss rose over a 50-epoch window at epoch {epoch}; halting",
                stacklevel=2,
            )
            break
        w.w1 -= lr * gw1
        w.b1 -= lr * gb1
        w.w2 -= lr * gw2
        w.b2 -= lr * gb2
    return TrainedModel(
        family="mlp",
        schema=data.feature_names,
        hyperparameters=p,
        weights=w,
        loss_trace=trace,
    )


def predict_mlp(model: TrainedModel, X: np.ndarray, threshold: float):
    w = model.weights
    _, prob = _forward(w, (X - w.mean) / w.sigma)
    return (prob > threshold).astype(np.int64), prob


def mlp_gradient(model: TrainedModel, batch: EncodedMatrix) -> np.ndarray:
    """Flat analytic gradient of the mean BCE loss over a batch.

    The batch is standardized with the model's stored statistics; layout
    matches :func:`pack_weights`.
    """
    if batch.feature_names != model.schema:
        raise SchemaMismatch("batch schema does not match model")
    w = model.weights
    Z = (batch.X - w.mean) / w.sigma
    gw1, gb1, gw2, gb2, _ = _gradients(w, Z, batch.y.astype(np.float64))
    return np.concatenate([gw1.ravel(), gb1.ravel(), gw2.ravel(), gb2.ravel()])


def pack_weights(w: MLPWeights) -> np.ndarray:
    return np.concatenate([w.w1.ravel(), w.b1.ravel(), w.w2.ravel(), w.b2.ravel()])


def unpack_weights(template: MLPWeights, flat: np.ndarray) -> MLPWeights:
    shapes = [template.w1.shape, template.b1.shape, template.w2.shape, template.b2.shape]
    parts = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        parts.append(flat[offset : offset + size].reshape(shape))
        offset += size
    return MLPWeights(template.mean, template.sigma, *parts)


def mlp_loss_flat(model: TrainedModel, flat: np.ndarray, batch: EncodedMatrix) -> float:
    """Loss as a function of a flat weight vector (finite-difference oracle hook)."""
    w = unpack_weights(model.weights, flat)
    Z = (batch.X - w.mean) / w.sigma
    _, prob = _forward(w, Z)
    return bce_loss(prob, batch.y.astype(np.float64))


def weights_to_json(w: MLPWeights) -> dict:
    return {
        "mean": w.mean.tolist(),
        "sigma": w.sigma.tolist(),
        "w1": w.w1.tolist(),
        "b1": w.b1.tolist(),
        "w2": w.w2.tolist(),
        "b2": w.b2.tolist(),
    }


def weights_from_json(doc: dict) -> MLPWeights:
    return MLPWeights(
        mean=np.asarray(doc["mean"], dtype=np.float64),
        sigma=np.asarray(doc["sigma"], dtype=np.float64),
        w1=np.asarray(doc["w1"], dtype=np.float64),
        b1=np.asarray(doc["b1"], dtype=np.float64),
        w2=np.asarray(doc["w2"], dtype=np.float64),
        b2=np.asarray(doc["b2"], dtype=np.float64),
    )
