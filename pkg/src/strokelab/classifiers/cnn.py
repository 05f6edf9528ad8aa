"""Small convolutional network over the 10 features laid out as a 1x2x5 grid.

Architecture: Conv(1->16, k3, s1, p1) + ReLU, Conv(16->8, k2, s1, p0) + ReLU,
flatten (32), Linear(32->16) + ReLU, Linear(16->1) + Sigmoid. Trained with
mini-batch gradient descent on mean binary cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteLoss, SchemaMismatch, SingleClass
from ..ingest import EncodedMatrix
from .base import ModelSpec, TrainedModel, _scaler
from .mlp import bce_loss, sigmoid

GRID = (1, 2, 5)  # channels, height, width of the reshaped feature grid


@dataclass
class CNNWeights:
    mean: np.ndarray
    sigma: np.ndarray
    conv1_w: np.ndarray  # (16, 1, 3, 3)
    conv1_b: np.ndarray  # (16,)
    conv2_w: np.ndarray  # (8, 16, 2, 2)
    conv2_b: np.ndarray  # (8,)
    fc1_w: np.ndarray  # (32, 16)
    fc1_b: np.ndarray  # (16,)
    fc2_w: np.ndarray  # (16, 1)
    fc2_b: np.ndarray  # (1,)


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(n, C, H, W) -> (n, P, C*kh*kw) patch matrix for stride-1 convolution."""
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    n, C, oh, ow = windows.shape[:4]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, C * kh * kw)


def _col2im(dcols: np.ndarray, x_shape: tuple, kh: int, kw: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patch gradients back."""
    n, C, H, W = x_shape
    oh, ow = H - kh + 1, W - kw + 1
    d6 = dcols.reshape(n, oh, ow, C, kh, kw)
    dx = np.zeros(x_shape)
    for di in range(kh):
        for dj in range(kw):
            dx[:, :, di : di + oh, dj : dj + ow] += d6[:, :, :, :, di, dj].transpose(0, 3, 1, 2)
    return dx


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out_c, _, kh, kw = w.shape
    oh, ow = x.shape[2] - kh + 1, x.shape[3] - kw + 1
    cols = _im2col(x, kh, kw)
    out = cols @ w.reshape(out_c, -1).T + b
    return out.transpose(0, 2, 1).reshape(x.shape[0], out_c, oh, ow), cols


def _forward(w: CNNWeights, Z: np.ndarray, keep: bool = False):
    n = Z.shape[0]
    x = Z.reshape(n, *GRID)
    z1, cols1 = _conv_forward(x, w.conv1_w, w.conv1_b, pad=1)
    a1 = np.maximum(z1, 0.0)
    z2, cols2 = _conv_forward(a1, w.conv2_w, w.conv2_b, pad=0)
    a2 = np.maximum(z2, 0.0)
    flat = a2.reshape(n, -1)
    z3 = flat @ w.fc1_w + w.fc1_b
    a3 = np.maximum(z3, 0.0)
    prob = sigmoid(a3 @ w.fc2_w + w.fc2_b).ravel()
    if not keep:
        return prob
    return prob, (cols1, z1, a1, cols2, z2, flat, z3, a3)


def _gradients(w: CNNWeights, Z: np.ndarray, y: np.ndarray):
    """Mean-BCE gradients for every parameter block."""
    n = Z.shape[0]
    prob, (cols1, z1, a1, cols2, z2, flat, z3, a3) = _forward(w, Z, keep=True)
    dz4 = ((prob - y) / n)[:, None]
    g_fc2_w = a3.T @ dz4
    g_fc2_b = dz4.sum(axis=0)
    dz3 = (dz4 @ w.fc2_w.T) * (z3 > 0.0)
    g_fc1_w = flat.T @ dz3
    g_fc1_b = dz3.sum(axis=0)
    da2 = (dz3 @ w.fc1_w.T).reshape(z2.shape)
    dz2 = da2 * (z2 > 0.0)

    out_c2 = w.conv2_w.shape[0]
    dz2r = dz2.reshape(n, out_c2, -1).transpose(0, 2, 1)
    g_conv2_w = np.einsum("npo,npk->ok", dz2r, cols2).reshape(w.conv2_w.shape)
    g_conv2_b = dz2r.sum(axis=(0, 1))
    dcols2 = np.einsum("npo,ok->npk", dz2r, w.conv2_w.reshape(out_c2, -1))
    da1 = _col2im(dcols2, a1.shape, w.conv2_w.shape[2], w.conv2_w.shape[3])
    dz1 = da1 * (z1 > 0.0)

    out_c1 = w.conv1_w.shape[0]
    dz1r = dz1.reshape(n, out_c1, -1).transpose(0, 2, 1)
    g_conv1_w = np.einsum("npo,npk->ok", dz1r, cols1).reshape(w.conv1_w.shape)
    g_conv1_b = dz1r.sum(axis=(0, 1))
    return (
        (g_conv1_w, g_conv1_b, g_conv2_w, g_conv2_b, g_fc1_w, g_fc1_b, g_fc2_w, g_fc2_b),
        prob,
    )


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def init_weights(seed: int, mean: np.ndarray, sigma: np.ndarray) -> CNNWeights:
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    return CNNWeights(
        mean=mean,
        sigma=sigma,
        conv1_w=_glorot(rng, (16, 1, 3, 3), 1 * 9, 16 * 9),
        conv1_b=np.zeros(16),
        conv2_w=_glorot(rng, (8, 16, 2, 2), 16 * 4, 8 * 4),
        conv2_b=np.zeros(8),
        fc1_w=_glorot(rng, (32, 16), 32, 16),
        fc1_b=np.zeros(16),
        fc2_w=_glorot(rng, (16, 1), 16, 1),
        fc2_b=np.zeros(1),
    )


def train_cnn(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    """Mini-batch gradient descent; deterministic batch order from the seed.

    Raises:
        SchemaMismatch: input does not have the 10 features the grid needs.
        SingleClass / NonFiniteLoss: as for the other gradient-trained models.
    """
    if data.n_features != int(np.prod(GRID)):
        raise SchemaMismatch(f"cnn needs exactly {np.prod(GRID)} features, got {data.n_features}")
    if len(np.unique(data.y)) < 2:
        raise SingleClass("cnn training needs both classes")
    p = spec.resolved()
    mean, sigma = _scaler(data.X)
    Z = (data.X - mean) / sigma
    y = data.y.astype(np.float64)
    w = init_weights(spec.seed, mean, sigma)
    rng = np.random.default_rng((spec.seed & 0xFFFFFFFFFFFFFFFF) ^ 0x5A5A5A5A)
    lr = float(p["learning_rate"])
    batch = int(p["batch_size"])
    n = Z.shape[0]
    trace: list[float] = []
    blocks = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")
    for epoch in range(int(p["epochs"])):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch):
            rows = perm[start : start + batch]
            grads, prob = _gradients(w, Z[rows], y[rows])
            loss = bce_loss(prob, y[rows])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}")
            losses.append(loss * len(rows))
            for name, g in zip(blocks, grads):
                setattr(w, name, getattr(w, name) - lr * g)
        trace.append(float(np.sum(losses) / n))
    return TrainedModel(
        family="cnn",
        schema=data.feature_names,
        hyperparameters=p,
        weights=w,
        loss_trace=trace,
    )


def predict_cnn(model: TrainedModel, X: np.ndarray, threshold: float):
    w = model.weights
    prob = _forward(w, (X - w.mean) / w.sigma)
    return (prob > threshold).astype(np.int64), prob


def forward_shapes(w: CNNWeights) -> list:
    """Per-stage output shapes derived structurally from the weight tensors."""
    c, h, width = GRID
    shapes: list = [(c, h, width)]
    for conv, pad in ((w.conv1_w, 1), (w.conv2_w, 0)):
        out_c, _, kh, kw = conv.shape
        h = h + 2 * pad - kh + 1
        width = width + 2 * pad - kw + 1
        shapes.append((out_c, h, width))
    shapes.append(out_c * h * width)
    shapes.append(w.fc1_w.shape[1])
    shapes.append(w.fc2_w.shape[1])
    return shapes


def pack_weights(w: CNNWeights) -> np.ndarray:
    return np.concatenate(
        [
            w.conv1_w.ravel(), w.conv1_b.ravel(), w.conv2_w.ravel(), w.conv2_b.ravel(),
            w.fc1_w.ravel(), w.fc1_b.ravel(), w.fc2_w.ravel(), w.fc2_b.ravel(),
        ]
    )


def unpack_weights(template: CNNWeights, flat: np.ndarray) -> CNNWeights:
    names = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")
    parts = {}
    offset = 0
    for name in names:
        shape = getattr(template, name).shape
        size = int(np.prod(shape))
        parts[name] = flat[offset : offset + size].reshape(shape)
        offset += size
    return CNNWeights(mean=template.mean, sigma=template.sigma, **parts)


def cnn_gradient(model: TrainedModel, batch: EncodedMatrix) -> np.ndarray:
    """Flat analytic gradient over a batch, layout matching :func:`pack_weights`."""
    if batch.feature_names != model.schema:
        raise SchemaMismatch("batch schema does not match model")
    w = model.weights
    Z = (batch.X - w.mean) / w.sigma
    grads, _ = _gradients(w, Z, batch.y.astype(np.float64))
    return np.concatenate([g.ravel() for g in grads])


def cnn_loss_flat(model: TrainedModel, flat: np.ndarray, batch: EncodedMatrix) -> float:
    w = unpack_weights(model.weights, flat)
    Z = (batch.X - w.mean) / w.sigma
    return bce_loss(_forward(w, Z), batch.y.astype(np.float64))


def weights_to_json(w: CNNWeights) -> dict:
    return {
        name: getattr(w, name).tolist()
        for name in (
            "mean", "sigma", "conv1_w", "conv1_b", "conv2_w", "conv2_b",
            "fc1_w", "fc1_b", "fc2_w", "fc2_b",
        )
    }


def weights_from_json(doc: dict) -> CNNWeights:
    return CNNWeights(**{k: np.asarray(v, dtype=np.float64) for k, v in doc.items()})
