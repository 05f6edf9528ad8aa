"""L1/L2-penalized logistic regression by proximal gradient descent.

The penalty is lam * (alpha * ||w||_1 + (1 - alpha)/2 * ||w||_2^2); alpha=1
is the lasso, alpha=0.5 the default elastic net. The step size comes from
the Lipschitz bound of the smooth part, which makes the objective
non-increasing across iterations. The intercept is unpenalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import SingleClass
from ..ingest import EncodedMatrix
from .base import ModelSpec, TrainedModel, _scaler
from .mlp import sigmoid


def soft_threshold(x: np.ndarray | float, t: float) -> np.ndarray | float:
    """Shrink toward zero: sign(x) * max(|x| - t, 0)."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass
class LogRegWeights:
    mean: np.ndarray
    sigma: np.ndarray
    w: np.ndarray
    b: float
    alpha: float
    lam: float


def _objective(Z: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, alpha: float, lam: float) -> float:
    s = Z @ w + b
    nll = float(np.mean(np.logaddexp(0.0, s) - y * s))
    return nll + lam * (alpha * float(np.abs(w).sum()) + 0.5 * (1.0 - alpha) * float(w @ w))


def train_penalized_logreg(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    if len(np.unique(data.y)) < 2:
        raise SingleClass("penalized logistic regression needs both classes")
    p = spec.resolved()
    alpha = float(p["alpha"])
    lam = float(p["lam"])
    if not 0.0 <= alpha <= 1.0 or lam < 0.0:
        raise ValueError(f"alpha must be in [0, 1] and lam >= 0, got {alpha}, {lam}")
    mean, sigma = _scaler(data.X)
    Z = (data.X - mean) / sigma
    y = data.y.astype(np.float64)
    n, d = Z.shape
    augmented = np.hstack([Z, np.ones((n, 1))])
    lipschitz = float(np.linalg.norm(augmented, 2)) ** 2 / (4.0 * n) + lam * (1.0 - alpha)
    step = 1.0 / lipschitz
    w = np.zeros(d)
    b = 0.0
    trace = [_objective(Z, y, w, b, alpha, lam)]
    for _ in range(int(p["iterations"])):
        prob = sigmoid(Z @ w + b)
        grad_w = Z.T @ (prob - y) / n + lam * (1.0 - alpha) * w
        grad_b = float(np.mean(prob - y))
        w = soft_threshold(w - step * grad_w, step * lam * alpha)
        b -= step * grad_b
        trace.append(_objective(Z, y, w, b, alpha, lam))
    if abs(trace[-1] - trace[-2]) > 1e-9 * max(1.0, abs(trace[-1])):
        warnings.warn("penalized logistic regression did not converge", stacklevel=2)
    return TrainedModel(
        family=spec.family,
        schema=data.feature_names,
        hyperparameters=p,
        weights=LogRegWeights(mean=mean, sigma=sigma, w=w, b=b, alpha=alpha, lam=lam),
        loss_trace=trace,
    )


def predict_penalized_logreg(model: TrainedModel, X: np.ndarray, threshold: float):
    w = model.weights
    prob = sigmoid(((X - w.mean) / w.sigma) @ w.w + w.b)
    return (prob > threshold).astype(np.int64), prob


def weights_to_json(w: LogRegWeights) -> dict:
    return {
        "mean": w.mean.tolist(),
        "sigma": w.sigma.tolist(),
        "w": w.w.tolist(),
        "b": w.b,
        "alpha": w.alpha,
        "lam": w.lam,
    }


def weights_from_json(doc: dict) -> LogRegWeights:
    return LogRegWeights(
        mean=np.asarray(doc["mean"], dtype=np.float64),
        sigma=np.asarray(doc["sigma"], dtype=np.float64),
        w=np.asarray(doc["w"], dtype=np.float64),
        b=float(doc["b"]),
        alpha=float(doc["alpha"]),
        lam=float(doc["lam"]),
    )
