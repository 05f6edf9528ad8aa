"""Model specs, the trained-model container, and the train/predict dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import SchemaMismatch
from ..ingest import EncodedMatrix

MODEL_FORMAT = "strokelab-model/1"

DEFAULTS: dict[str, dict[str, Any]] = {
    "mlp": {"hidden": 8, "learning_rate": 0.1, "epochs": 500, "init_scale": 0.5},
    "dt": {"max_depth": 6, "min_samples_split": 10},
    "rf": {
        "n_trees": 200,
        "max_depth": 12,
        "min_samples_split": 10,
        "bootstrap": True,
        "feature_subsample": True,
    },
    "svm": {"lam": 1e-3, "epochs": 1000},
    "lasso": {"alpha": 1.0, "lam": 0.01, "iterations": 2000},
    "elasticnet": {"alpha": 0.5, "lam": 0.01, "iterations": 2000},
    "cnn": {"batch_size": 32, "learning_rate": 0.01, "epochs": 100},
}
FAMILIES = tuple(DEFAULTS)


@dataclass(frozen=True)
class ModelSpec:
    """Classifier family, training seed, and hyperparameter overrides."""

    family: str
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.family}: {sorted(unknown)}")

    def resolved(self) -> dict[str, Any]:
        merged = dict(DEFAULTS[self.family])
        merged.update(self.params)
        return merged


@dataclass
class TrainedModel:
    family: str
    schema: tuple[str, ...]
    hyperparameters: dict[str, Any]
    weights: Any
    loss_trace: list[float] | None = None

    def __post_init__(self):
        self.schema = tuple(self.schema)


def _scaler(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean/std from the training matrix (std 0 becomes 1)."""
    mean = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return mean, sigma


def train(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    """Train one model; a pure function of (data, spec) including the seed."""
    from . import cnn, logreg, mlp, svm, tree

    trainers = {
        "mlp": mlp.train_mlp,
        "dt": tree.train_decision_tree,
        "rf": tree.train_random_forest,
        "svm": svm.train_linear_svm,
        "lasso": logreg.train_penalized_logreg,
        "elasticnet": logreg.train_penalized_logreg,
        "cnn": cnn.train_cnn,
    }
    return trainers[spec.family](data, spec)


def predict(
    model: TrainedModel, data: EncodedMatrix, threshold: float = 0.5
) -> tuple[np.ndarray, np.ndarray | None]:
    """Labels (and a probability-like score where the family defines one).

    Probabilistic families threshold their probability at ``threshold``
    (strictly greater, so an exact tie falls to class 0); the SVM uses the
    sign of its decision value; trees and forests vote.
    """
    from . import cnn, logreg, mlp, svm, tree

    if data.feature_names != model.schema:
        raise SchemaMismatch(f"data columns {data.feature_names} != model schema {model.schema}")
    if data.n_rows == 0:
        return np.zeros(0, dtype=np.int64), None
    predictors = {
        "mlp": mlp.predict_mlp,
        "dt": tree.predict_decision_tree,
        "rf": tree.predict_random_forest,
        "svm": svm.predict_linear_svm,
        "lasso": logreg.predict_penalized_logreg,
        "elasticnet": logreg.predict_penalized_logreg,
        "cnn": cnn.predict_cnn,
    }
    return predictors[model.family](model, data.X, threshold)


def model_to_json(model: TrainedModel) -> dict:
    """Versioned JSON document with the full learned state."""
    from . import cnn, logreg, mlp, svm, tree

    serializers = {
        "mlp": mlp.weights_to_json,
        "dt": tree.tree_weights_to_json,
        "rf": tree.forest_weights_to_json,
        "svm": svm.weights_to_json,
        "lasso": logreg.weights_to_json,
        "elasticnet": logreg.weights_to_json,
        "cnn": cnn.weights_to_json,
    }
    return {
        "format": MODEL_FORMAT,
        "family": model.family,
        "schema": list(model.schema),
        "hyperparameters": model.hyperparameters,
        "loss_trace": model.loss_trace,
        "weights": serializers[model.family](model.weights),
    }


def model_from_json(doc: dict) -> TrainedModel:
    from . import cnn, logreg, mlp, svm, tree

    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model document format: {doc.get('format')!r}")
    loaders = {
        "mlp": mlp.weights_from_json,
        "dt": tree.tree_weights_from_json,
        "rf": tree.forest_weights_from_json,
        "svm": svm.weights_from_json,
        "lasso": logreg.weights_from_json,
        "elasticnet": logreg.weights_from_json,
        "cnn": cnn.weights_from_json,
    }
    family = doc["family"]
    return TrainedModel(
        family=family,
        schema=tuple(doc["schema"]),
        hyperparameters=dict(doc["hyperparameters"]),
        weights=loaders[family](doc["weights"]),
        loss_trace=doc.get("loss_trace"),
    )
