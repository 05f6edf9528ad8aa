"""Benchmark harness: seeded repeated downsampling runs, feature-set studies,
and add-one/drop-one ablations.

Every run is a pure function of (config, run seed): downsample, 70:30
stratified split, feature selection or PCA projection, train, score. Runs
may execute in any order (or in parallel) with identical aggregate output.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import ModelSpec, predict, train
from .ingest import FEATURE_COLUMNS, EncodedMatrix
from .metrics import AggregateReport, MetricsReport, aggregate, compute_metrics, confusion
from .pca import PCAModel, fit_pca, transform
from .sampling import SplitSpec, balanced_downsample, derive_run_seeds, split
from .stats import auc_importance

#: The four features found most predictive: age, heart disease, glucose, hypertension.
TOP_FOUR = ("age", "heart_disease", "avg_glucose_level", "hypertension")
#: Starting pool for the add-one-feature ablation.
BASE_THREE = ("age", "heart_disease", "avg_glucose_level")


@dataclass(frozen=True)
class FeatureSet:
    """Which columns the classifier sees: all, top4, custom list, or PC scores."""

    kind: str  # "all" | "top4" | "custom" | "pc"
    features: tuple[str, ...] = ()
    k: int = 0
    train_fold_pca: bool = True

    def __post_init__(self):
        if self.kind not in ("all", "top4", "custom", "pc"):
            raise ValueError(f"unknown feature set kind {self.kind!r}")
        if self.kind == "custom":
            if not self.features:
                raise ValueError("custom feature set needs at least one feature")
            unknown = set(self.features) - set(FEATURE_COLUMNS)
            if unknown:
                raise ValueError(f"unknown features: {sorted(unknown)}")
        if self.kind == "pc" and not 1 <= self.k <= len(FEATURE_COLUMNS):
            raise ValueError(f"pc component count must be in [1, {len(FEATURE_COLUMNS)}]")

    @classmethod
    def parse(cls, text: str, train_fold_pca: bool = True) -> "FeatureSet":
        """Parse CLI syntax: all | top4 | custom:<a,b,...> | pc:<k>."""
        if text == "all":
            return cls(kind="all")
        if text == "top4":
            return cls(kind="top4")
        if text.startswith("custom:"):
            names = tuple(s.strip() for s in text.split(":", 1)[1].split(",") if s.strip())
            return cls(kind="custom", features=names)
        if text.startswith("pc:"):
            return cls(kind="pc", k=int(text.split(":", 1)[1]), train_fold_pca=train_fold_pca)
        raise ValueError(f"cannot parse feature set {text!r}")

    def label(self) -> str:
        if self.kind == "custom":
            return "custom:" + ",".join(self.features)
        if self.kind == "pc":
            return f"pc:{self.k}"
        return self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    data: EncodedMatrix
    features: FeatureSet
    model: ModelSpec
    runs: int = 100
    master_seed: int = 42
    split: SplitSpec = field(default_factory=SplitSpec)
    metrics_mode: str = "positive"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def describe(self) -> dict:
        return {
            "data_digest": self.data.digest(),
            "data_source": self.data.source,
            "features": self.features.label(),
            "train_fold_pca": self.features.train_fold_pca,
            "model": {
                "family": self.model.family,
                "seed": self.model.seed,
                "hyperparameters": self.model.resolved(),
            },
            "runs": self.runs,
            "master_seed": self.master_seed,
            "split": {
                "train_fraction": self.split.train_fraction,
                "stratified": self.split.stratified,
            },
            "metrics_mode": self.metrics_mode,
        }

    def digest(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class ProjectionInfo:
    """PCA parameters actually used to project a run's features."""

    means: np.ndarray
    sigmas: np.ndarray
    components: np.ndarray


def prepare_features(
    config: ExperimentConfig, train_m: EncodedMatrix, test_m: EncodedMatrix
) -> tuple[EncodedMatrix, EncodedMatrix, ProjectionInfo | None]:
    """Apply the configured feature selection or PC projection to one split.

    With ``train_fold_pca`` the projection is fit on the train fold only, so
    its parameters cannot depend on test rows; the global mode instead uses a
    PCA fit on the full configured dataset.
    """
    fs = config.features
    if fs.kind == "all":
        return train_m, test_m, None
    if fs.kind in ("top4", "custom"):
        names = TOP_FOUR if fs.kind == "top4" else fs.features
        return train_m.select(names), test_m.select(names), None
    model = fit_pca(train_m if fs.train_fold_pca else config.data)
    names = tuple(f"PC{i + 1}" for i in range(fs.k))
    projected = []
    for part in (train_m, test_m):
        scores = transform(model, part, fs.k).scores
        projected.append(part.replace_features(scores, names))
    info = ProjectionInfo(
        means=model.means, sigmas=model.sigmas, components=model.loadings[:, : fs.k]
    )
    return projected[0], projected[1], info


def _model_seed(spec_seed: int, run_seed: int) -> int:
    # Deterministic per-run training seed so repeated runs vary their
    # initialization as well as their sampling.
    return int(
        np.random.SeedSequence(
            (spec_seed & 0xFFFFFFFFFFFFFFFF, run_seed & 0xFFFFFFFFFFFFFFFF)
        ).generate_state(1, np.uint64)[0]
    )


def run_single(config: ExperimentConfig, run_seed: int) -> MetricsReport:
    """One downsample/split/train/score cycle, deterministic in (config, seed)."""
    balanced = balanced_downsample(config.data, run_seed)
    train_m, test_m = split(balanced, replace(config.split, seed=run_seed))
    tr, te, _ = prepare_features(config, train_m, test_m)
    spec = replace(config.model, seed=_model_seed(config.model.seed, run_seed))
    model = train(tr, spec)
    labels, _ = predict(model, te)
    return compute_metrics(confusion(labels, te.y), config.metrics_mode)


@dataclass(frozen=True)
class RunResult:
    """Per-run reports keyed by (run index, run seed), plus their aggregate."""

    runs: tuple[tuple[int, int, MetricsReport], ...]
    aggregate: AggregateReport

    def csv_lines(self) -> list[str]:
        header = "run,seed,precision,recall,f_score,accuracy,miss_rate,fallout_rate"
        lines = [header]
        for index, seed, report in self.runs:
            values = [repr(getattr(report, m)) for m in (
                "precision", "recall", "f_score", "accuracy", "miss_rate", "fallout_rate")]
            lines.append(f"{index},{seed}," + ",".join(values))
        return lines


_WORKER_CONFIG: ExperimentConfig | None = None


def _init_worker(config: ExperimentConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _worker_run(seed: int) -> MetricsReport:
    return run_single(_WORKER_CONFIG, seed)


def run_benchmark(config: ExperimentConfig, workers: int = 1) -> RunResult:
    """Run the full seeded experiment batch and aggregate.

    Seeds are derived up front, and aggregation folds over run-index order,
    so the result does not depend on execution order or worker count.
    """
    seeds = derive_run_seeds(config.master_seed, config.runs)
    if workers > 1 and config.runs > 1:
        chunk = max(1, config.runs // (workers * 4))
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(config,)
        ) as pool:
            reports = list(pool.map(_worker_run, seeds, chunksize=chunk))
    else:
        reports = [run_single(config, seed) for seed in seeds]
    runs = tuple((i, seed, report) for i, (seed, report) in enumerate(zip(seeds, reports)))
    return RunResult(runs=runs, aggregate=aggregate(reports))


@dataclass(frozen=True)
class AblationStage:
    label: str
    features: tuple[str, ...]
    result: RunResult


@dataclass(frozen=True)
class AblationResult:
    mode: str  # "add" | "remove"
    stages: tuple[AblationStage, ...]

    def csv_lines(self) -> list[str]:
        lines = ["stage,label,run,seed,accuracy,miss_rate"]
        for s_idx, stage in enumerate(self.stages):
            for index, seed, report in stage.result.runs:
                lines.append(
                    f"{s_idx},{stage.label},{index},{seed},"
                    f"{report.accuracy!r},{report.miss_rate!r}"
                )
        return lines


def ablation_add(
    config: ExperimentConfig,
    base: tuple[str, ...] = BASE_THREE,
    order: tuple[str, ...] | None = None,
    workers: int = 1,
) -> AblationResult:
    """Grow the feature pool one feature at a time, benchmarking each stage.

    The default addition order follows the AUC importance ranking of the
    features not already in the base pool.
    """
    if order is None:
        ranking = auc_importance(config.data)
        order = tuple(f for f in ranking.top(len(ranking.feature_names)) if f not in base)
    stages = []
    pool = tuple(base)
    stages.append(_ablation_stage(config, "base", pool, workers))
    for feature in order:
        pool = pool + (feature,)
        stages.append(_ablation_stage(config, f"+{feature}", pool, workers))
    return AblationResult(mode="add", stages=tuple(stages))


def ablation_remove(config: ExperimentConfig, workers: int = 1) -> AblationResult:
    """Benchmark all-features-minus-one, one stage per feature."""
    stages = []
    for feature in config.data.feature_names:
        kept = tuple(f for f in config.data.feature_names if f != feature)
        stages.append(_ablation_stage(config, f"-{feature}", kept, workers))
    return AblationResult(mode="remove", stages=tuple(stages))


def _ablation_stage(
    config: ExperimentConfig, label: str, features: tuple[str, ...], workers: int
) -> AblationStage:
    stage_config = replace(config, features=FeatureSet(kind="custom", features=features))
    return AblationStage(label=label, features=features, result=run_benchmark(stage_config, workers))


def fit_global_pca(config: ExperimentConfig) -> PCAModel:
    """PCA over the full configured dataset (the non-train-fold projection mode)."""
    return fit_pca(config.data)
