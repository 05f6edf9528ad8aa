"""Correlation, model-free feature importance, and CHADS2 risk scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, SingleClass, ZeroVariance
from .ingest import EHRRecord, EncodedMatrix


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation coefficient of two equal-length vectors.

    Raises:
        LengthMismatch: unequal lengths or fewer than 2 points.
        ZeroVariance: either vector is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance()
    return float(np.clip((xc @ yc) / np.sqrt(sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]

    def get(self, a: str, b: str) -> float:
        i = self.feature_names.index(a)
        j = self.feature_names.index(b)
        return float(self.values[i, j])

    def csv_lines(self) -> list[str]:
        lines = ["feature," + ",".join(self.feature_names)]
        for i, name in enumerate(self.feature_names):
            lines.append(name + "," + ",".join(repr(float(v)) for v in self.values[i]))
        return lines


def correlation_matrix(data: EncodedMatrix) -> CorrelationMatrix:
    """Pairwise Pearson coefficients of every feature column.

    Exactly symmetric with a unit diagonal; raises ZeroVariance naming the
    first constant column.
    """
    if data.n_rows < 2:
        raise LengthMismatch("need at least 2 rows")
    F = data.n_features
    for j in range(F):
        if np.ptp(data.X[:, j]) == 0.0:
            raise ZeroVariance(data.feature_names[j])
    values = np.eye(F)
    for i in range(F):
        for j in range(i + 1, F):
            values[i, j] = values[j, i] = pearson(data.X[:, i], data.X[:, j])
    values.flags.writeable = False
    return CorrelationMatrix(values=values, feature_names=data.feature_names)


def _midranks(v: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their rank range."""
    _, inverse, counts = np.unique(v, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return (starts + (counts + 1) / 2.0)[inverse]


def feature_auc(values: np.ndarray, labels: np.ndarray) -> float:
    """Two-class ROC AUC of a single feature via the Mann-Whitney rank statistic."""
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("both classes required for AUC")
    ranks = _midranks(values)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class ImportanceRanking:
    """Per-feature separability scores (folded AUC in [0.5, 1]) and ranks."""

    feature_names: tuple[str, ...]
    scores: tuple[float, ...]
    ranks: tuple[int, ...]

    def top(self, k: int) -> tuple[str, ...]:
        by_rank = sorted(zip(self.ranks, self.feature_names))
        return tuple(name for _, name in by_rank[:k])

    def to_json(self) -> dict:
        return {
            "features": [
                {"feature": f, "score": s, "rank": r}
                for f, s, r in zip(self.feature_names, self.scores, self.ranks)
            ]
        }


def auc_importance(data: EncodedMatrix) -> ImportanceRanking:
    """Rank features by folded ROC AUC against the stroke label.

    The AUC is folded as max(auc, 1 - auc) so the score measures
    separability regardless of direction; ties break by column order.
    """
    if data.n_rows < 2:
        raise LengthMismatch("need at least 2 rows")
    scores = []
    for j in range(data.n_features):
        auc = feature_auc(data.X[:, j], data.y)
        scores.append(max(auc, 1.0 - auc))
    scores_arr = np.asarray(scores)
    order = np.lexsort((np.arange(len(scores_arr)), -scores_arr))
    ranks = np.empty(len(scores_arr), dtype=int)
    ranks[order] = np.arange(1, len(scores_arr) + 1)
    return ImportanceRanking(
        feature_names=data.feature_names,
        scores=tuple(float(s) for s in scores),
        ranks=tuple(int(r) for r in ranks),
    )


# --- CHADS2 -----------------------------------------------------------------

#: Casual plasma glucose threshold (mg/dL) used as the diabetes proxy.
GLUCOSE_DIABETES_THRESHOLD = 200.0
#: Age threshold for the age point.
AGE_THRESHOLD = 75.0


def chads2_score(
    record: EHRRecord,
    *,
    age_threshold: float = AGE_THRESHOLD,
    glucose_threshold: float = GLUCOSE_DIABETES_THRESHOLD,
) -> int:
    """CHADS2 risk score from the fields available in this schema.

    Cardiac failure is proxied by the heart-disease flag, diabetes by
    average glucose >= ``glucose_threshold``. The prior-stroke component
    (worth 2 points) is always 0 here: the only stroke field is the
    prediction target and may not leak into the score. Range 0-4.
    """
    return (
        record.heart_disease
        + record.hypertension
        + (1 if record.age >= age_threshold else 0)
        + (1 if record.avg_glucose_level >= glucose_threshold else 0)
    )


@dataclass(frozen=True)
class Chads2Result:
    histogram: dict[int, int]
    stroke_proportion: dict[int, float]
    monotone_nondecreasing: bool
    config: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "stroke_proportion": {
                str(k): v for k, v in sorted(self.stroke_proportion.items())
            },
            "monotone_nondecreasing": self.monotone_nondecreasing,
            "config": dict(self.config),
        }


def chads2_analysis(
    records: list[EHRRecord],
    *,
    age_threshold: float = AGE_THRESHOLD,
    glucose_threshold: float = GLUCOSE_DIABETES_THRESHOLD,
) -> Chads2Result:
    """Score every record; report the score histogram and per-score stroke rate.

    Monotonicity of the stroke proportion over attained scores is reported,
    never assumed.
    """
    if not records:
        raise LengthMismatch("no records")
    counts: dict[int, int] = {}
    positives: dict[int, int] = {}
    for r in records:
        s = chads2_score(r, age_threshold=age_threshold, glucose_threshold=glucose_threshold)
        counts[s] = counts.get(s, 0) + 1
        positives[s] = positives.get(s, 0) + r.stroke
    proportion = {s: positives[s] / counts[s] for s in counts}
    ordered = [proportion[s] for s in sorted(proportion)]
    monotone = all(a <= b + 1e-12 for a, b in zip(ordered, ordered[1:]))
    return Chads2Result(
        histogram=counts,
        stroke_proportion=proportion,
        monotone_nondecreasing=monotone,
        config={"age_threshold": age_threshold, "glucose_threshold": glucose_threshold},
    )
