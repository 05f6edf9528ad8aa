"""Confusion-matrix metrics and their aggregation over repeated runs.

Positive class is stroke (label 1). Two averaging modes are supported:
"positive" reports precision/recall/F for the stroke class only; "macro"
averages them over both classes. Accuracy, miss rate and fall-out rate are
the same in both modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyConfusion, EmptyInput, InvalidLabel, LengthMismatch

METRIC_NAMES = ("precision", "recall", "f_score", "accuracy", "miss_rate", "fallout_rate")
MODES = ("positive", "macro")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions: np.ndarray, truth: np.ndarray) -> ConfusionMatrix:
    """Count TP/FP/TN/FN with stroke (1) as the positive class.

    Raises:
        LengthMismatch: unequal or empty inputs.
        InvalidLabel: any value outside {0, 1}.
    """
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise LengthMismatch(f"shapes {predictions.shape} vs {truth.shape}")
    if len(predictions) == 0:
        raise LengthMismatch("empty label vectors")
    for name, v in (("predictions", predictions), ("truth", truth)):
        if not np.isin(v, (0, 1)).all():
            raise InvalidLabel(f"{name} contains labels outside {{0, 1}}")
    tp = int(np.sum((predictions == 1) & (truth == 1)))
    fp = int(np.sum((predictions == 1) & (truth == 0)))
    tn = int(np.sum((predictions == 0) & (truth == 0)))
    fn = int(np.sum((predictions == 0) & (truth == 1)))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f_score: float
    accuracy: float
    miss_rate: float
    fallout_rate: float
    mode: str = "positive"
    zero_division: bool = False

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _ratio(num: int, den: int) -> tuple[float, bool]:
    # Zero denominator yields 0.0 with a flag instead of NaN.
    if den == 0:
        return 0.0, True
    return num / den, False


def _f_score(p: float, r: float) -> tuple[float, bool]:
    if p + r == 0.0:
        return 0.0, True
    return 2.0 * p * r / (p + r), False


def compute_metrics(cm: ConfusionMatrix, mode: str = "positive") -> MetricsReport:
    """All six reported metrics from one confusion matrix.

    Raises:
        EmptyConfusion: zero total count.
        ValueError: unknown mode.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if cm.total == 0:
        raise EmptyConfusion("confusion matrix has no counts")
    flags = []
    prec_pos, z1 = _ratio(cm.tp, cm.tp + cm.fp)
    rec_pos, z2 = _ratio(cm.tp, cm.tp + cm.fn)
    miss, z3 = _ratio(cm.fn, cm.fn + cm.tp)
    fallout, z4 = _ratio(cm.fp, cm.fp + cm.tn)
    accuracy = (cm.tp + cm.tn) / cm.total
    flags += [z1, z2, z3, z4]
    if mode == "positive":
        f, zf = _f_score(prec_pos, rec_pos)
        flags.append(zf)
        precision, recall = prec_pos, rec_pos
    else:
        prec_neg, z5 = _ratio(cm.tn, cm.tn + cm.fn)
        rec_neg, z6 = _ratio(cm.tn, cm.tn + cm.fp)
        f_pos, z7 = _f_score(prec_pos, rec_pos)
        f_neg, z8 = _f_score(prec_neg, rec_neg)
        flags += [z5, z6, z7, z8]
        precision = (prec_pos + prec_neg) / 2.0
        recall = (rec_pos + rec_neg) / 2.0
        f = (f_pos + f_neg) / 2.0
    return MetricsReport(
        precision=precision,
        recall=recall,
        f_score=f,
        accuracy=accuracy,
        miss_rate=miss,
        fallout_rate=fallout,
        mode=mode,
        zero_division=any(flags),
    )


@dataclass(frozen=True)
class AggregateReport:
    """Per-metric sample mean/variance over runs, raw values kept in run order."""

    means: dict[str, float]
    variances: dict[str, float]
    raw: tuple[MetricsReport, ...]
    single_run: bool = False

    @property
    def count(self) -> int:
        return len(self.raw)

    def raw_values(self, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.raw]

    def to_json(self) -> dict:
        return {
            "runs": self.count,
            "mode": self.raw[0].mode,
            "means": {k: self.means[k] for k in METRIC_NAMES},
            "variances": {k: self.variances[k] for k in METRIC_NAMES},
            "single_run": self.single_run,
        }


def aggregate(reports: list[MetricsReport]) -> AggregateReport:
    """Sample mean and variance (ddof=1) of each metric across runs.

    A single report aggregates to variance 0 with the ``single_run`` flag.
    """
    if not reports:
        raise EmptyInput("no reports to aggregate")
    means: dict[str, float] = {}
    variances: dict[str, float] = {}
    single = len(reports) == 1
    for name in METRIC_NAMES:
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        means[name] = float(values.mean())
        variances[name] = 0.0 if single else float(values.var(ddof=1))
    return AggregateReport(
        means=means, variances=variances, raw=tuple(reports), single_run=single
    )


def histogram_bins(
    values: list[float], width: float = 0.02, lo: float = 0.0, hi: float = 1.0
) -> list[tuple[float, float, int]]:
    """Fixed-width binning of per-run values: (bin_lo, bin_hi, count) rows."""
    if width <= 0:
        raise ValueError("width must be positive")
    edges = np.arange(lo, hi + width, width)
    counts, _ = np.histogram(np.asarray(values), bins=edges)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))
    ]
