"""Seven from-scratch classifier families behind one train/predict interface."""

from .base import (
    DEFAULTS,
    FAMILIES,
    MODEL_FORMAT,
    ModelSpec,
    TrainedModel,
    model_from_json,
    model_to_json,
    predict,
    train,
)

__all__ = [
    "DEFAULTS",
    "FAMILIES",
    "MODEL_FORMAT",
    "ModelSpec",
    "TrainedModel",
    "model_from_json",
    "model_to_json",
    "predict",
    "train",
]
