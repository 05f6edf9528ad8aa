"""Linear SVM: L2-regularized hinge loss by deterministic subgradient descent.

Labels map internally to {-1, +1}; the step size follows the 1/(lambda * t)
schedule over full-batch subgradients. The bias is unregularized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingleClass
from ..ingest import EncodedMatrix
from .base import ModelSpec, TrainedModel, _scaler


@dataclass
class SVMWeights:
    mean: np.ndarray
    sigma: np.ndarray
    w: np.ndarray
    b: float


def train_linear_svm(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    if len(np.unique(data.y)) < 2:
        raise SingleClass("svm training needs both classes")
    p = spec.resolved()
    lam = float(p["lam"])
    mean, sigma = _scaler(data.X)
    Z = (data.X - mean) / sigma
    yv = 2.0 * data.y.astype(np.float64) - 1.0
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    trace: list[float] = []
    for t in range(1, int(p["epochs"]) + 1):
        margins = yv * (Z @ w + b)
        violating = margins < 1.0
        grad_w = lam * w - (yv[violating] @ Z[violating]) / n
        grad_b = -float(yv[violating].sum()) / n
        step = 1.0 / (lam * t)
        w -= step * grad_w
        b -= step * grad_b
        trace.append(
            float(0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - margins)))
        )
    return TrainedModel(
        family="svm",
        schema=data.feature_names,
        hyperparameters=p,
        weights=SVMWeights(mean=mean, sigma=sigma, w=w, b=b),
        loss_trace=trace,
    )


def predict_linear_svm(model: TrainedModel, X: np.ndarray, threshold: float):
    w = model.weights
    decision = ((X - w.mean) / w.sigma) @ w.w + w.b
    # sign(0) falls to class 0
    return (decision > 0.0).astype(np.int64), None


def weights_to_json(w: SVMWeights) -> dict:
    return {"mean": w.mean.tolist(), "sigma": w.sigma.tolist(), "w": w.w.tolist(), "b": w.b}


def weights_from_json(doc: dict) -> SVMWeights:
    return SVMWeights(
        mean=np.asarray(doc["mean"], dtype=np.float64),
        sigma=np.asarray(doc["sigma"], dtype=np.float64),
        w=np.asarray(doc["w"], dtype=np.float64),
        b=float(doc["b"]),
    )
