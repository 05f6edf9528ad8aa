"""EHR CSV ingestion: parsing, validation, categorical encoding, imputation.

Also provides a seeded synthetic-cohort generator used as a test fixture
when the public stroke CSV is not available locally.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    EmptyInput,
    InvalidBalance,
    MissingColumn,
    UnknownLevel,
)

# Canonical CSV header (matched case-insensitively on input).
CSV_COLUMNS = (
    "id",
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "Residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
    "stroke",
)

# Feature order of the encoded design matrix (id and stroke excluded).
FEATURE_COLUMNS = (
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
)

_MISSING_BMI_TOKENS = {"", "n/a", "na", "nan"}

# Binary categoricals get a fixed canonical code order regardless of the
# order levels appear in the data.
_CANONICAL_BINARY = {
    "gender": ("Female", "Male"),
    "ever_married": ("No", "Yes"),
    "residence_type": ("Rural", "Urban"),
}
_CATEGORICAL = ("gender", "ever_married", "work_type", "residence_type", "smoking_status")


@dataclass(frozen=True)
class EHRRecord:
    """One patient row from the stroke EHR dataset.

    ``bmi`` is None when the source cell was the missing marker ("N/A").
    """

    id: str
    gender: str
    age: float
    hypertension: int
    heart_disease: int
    ever_married: str
    work_type: str
    residence_type: str
    avg_glucose_level: float
    bmi: float | None
    smoking_status: str
    stroke: int

    def validate(self) -> None:
        if not 0.0 <= self.age <= 130.0:
            raise ValueError(f"age out of range: {self.age}")
        if self.avg_glucose_level <= 0.0:
            raise ValueError(f"avg_glucose_level must be positive: {self.avg_glucose_level}")
        if self.bmi is not None and not 5.0 < self.bmi < 120.0:
            raise ValueError(f"bmi out of range: {self.bmi}")
        for name in ("hypertension", "heart_disease", "stroke"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")


@dataclass(frozen=True)
class RowIssue:
    """A rejected CSV row: 1-based line number plus the reason."""

    row: int
    reason: str


@dataclass
class ParseResult:
    records: list[EHRRecord]
    issues: list[RowIssue] = field(default_factory=list)


def parse_csv(path: str | Path, schema: tuple[str, ...] = CSV_COLUMNS) -> ParseResult:
    """Parse a stroke EHR CSV into validated records.

    Every data row either becomes an :class:`EHRRecord` or is reported in
    ``issues`` with its line number and a reason. Missing BMI ("N/A") and
    the "Unknown" smoking status are preserved, not dropped.

    Raises:
        EmptyFile: the file has no header row.
        MissingColumn: a schema column is absent from the header.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"no header row in {path}") from None
        colmap: dict[str, int] = {}
        lowered = [h.strip().lower() for h in header]
        for name in schema:
            try:
                colmap[name.lower()] = lowered.index(name.lower())
            except ValueError:
                raise MissingColumn(name) from None

        records: list[EHRRecord] = []
        issues: list[RowIssue] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                records.append(_parse_row(row, colmap))
            except ValueError as exc:
                issues.append(RowIssue(row=lineno, reason=str(exc)))
    return ParseResult(records=records, issues=issues)


def _parse_row(row: list[str], colmap: dict[str, int]) -> EHRRecord:
    def cell(name: str) -> str:
        idx = colmap[name.lower()]
        if idx >= len(row):
            raise ValueError(f"short row, no value for {name!r}")
        return row[idx].strip()

    def number(name: str) -> float:
        raw = cell(name)
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"cannot parse {name!r} value {raw!r}") from None

    def flag(name: str) -> int:
        value = number(name)
        if value not in (0.0, 1.0):
            raise ValueError(f"{name!r} must be 0 or 1, got {value}")
        return int(value)

    bmi_raw = cell("bmi")
    bmi = None if bmi_raw.lower() in _MISSING_BMI_TOKENS else number("bmi")
    record = EHRRecord(
        id=cell("id"),
        gender=cell("gender"),
        age=number("age"),
        hypertension=flag("hypertension"),
        heart_disease=flag("heart_disease"),
        ever_married=cell("ever_married"),
        work_type=cell("work_type"),
        residence_type=cell("Residence_type"),
        avg_glucose_level=number("avg_glucose_level"),
        bmi=bmi,
        smoking_status=cell("smoking_status"),
        stroke=flag("stroke"),
    )
    record.validate()
    return record


@dataclass(frozen=True)
class EncodingMap:
    """Categorical level -> integer code tables plus the BMI imputation value.

    Codes are consecutive integers starting at 0. Binary features use the
    canonical order (No/Female/Rural -> 0, Yes/Male/Urban -> 1); other
    features order their observed levels case-insensitively alphabetically,
    so the mapping does not depend on row order.
    """

    levels: dict[str, tuple[str, ...]]
    bmi_fill: float
    imputation: dict[str, str] = field(default_factory=lambda: {"bmi": "mean"})

    def code(self, feature: str, level: str) -> int:
        try:
            return self.levels[feature].index(level)
        except ValueError:
            raise UnknownLevel(feature, level) from None

    def decode(self, feature: str, code: int) -> str:
        return self.levels[feature][code]

    def to_json(self) -> dict:
        return {
            "levels": {k: list(v) for k, v in self.levels.items()},
            "bmi_fill": self.bmi_fill,
            "imputation": dict(self.imputation),
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def fit_encoding(records: list[EHRRecord]) -> EncodingMap:
    """Learn the categorical code tables and BMI imputation value.

    Raises:
        EmptyInput: no records, or no observed BMI value to average.
    """
    if not records:
        raise EmptyInput("cannot fit an encoding on zero records")
    levels: dict[str, tuple[str, ...]] = {}
    for feature in _CATEGORICAL:
        seen = {getattr(r, feature) for r in records}
        canonical = _CANONICAL_BINARY.get(feature, ())
        ordered = [lvl for lvl in canonical if lvl in seen]
        extras = sorted(seen.difference(canonical), key=str.casefold)
        levels[feature] = tuple(ordered + extras)
    observed = [r.bmi for r in records if r.bmi is not None]
    if not observed:
        raise EmptyInput("no observed bmi values to impute from")
    return EncodingMap(levels=levels, bmi_fill=float(np.mean(observed)))


@dataclass(frozen=True)
class EncodedMatrix:
    """Numeric design matrix (n x features) with the binary stroke labels.

    Immutable: the arrays are marked read-only. ``source`` and
    ``encoding_digest`` record provenance for the audit manifest.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    source: str = ""
    encoding_digest: str = ""

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"inconsistent shapes: X{X.shape} y{y.shape}")
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match column count")
        if X.shape[0] < 1:
            raise ValueError("matrix must have at least one row")
        if not np.isfinite(X).all():
            raise ValueError("matrix contains non-finite values")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, indices: np.ndarray) -> "EncodedMatrix":
        """Row subset (copy), preserving provenance."""
        return EncodedMatrix(
            X=self.X[indices].copy(),
            y=self.y[indices].copy(),
            feature_names=self.feature_names,
            source=self.source,
            encoding_digest=self.encoding_digest,
        )

    def select(self, names: tuple[str, ...]) -> "EncodedMatrix":
        """Column subset by feature name, in the order given."""
        idx = [self.feature_names.index(n) for n in names]
        return EncodedMatrix(
            X=self.X[:, idx].copy(),
            y=self.y.copy(),
            feature_names=tuple(names),
            source=self.source,
            encoding_digest=self.encoding_digest,
        )

    def replace_features(self, X: np.ndarray, names: tuple[str, ...]) -> "EncodedMatrix":
        """Same rows/labels with a new feature block (e.g. PCA scores)."""
        return EncodedMatrix(
            X=X,
            y=self.y.copy(),
            feature_names=names,
            source=self.source,
            encoding_digest=self.encoding_digest,
        )

    def to_csv_bytes(self) -> bytes:
        """Canonical serialization: header + shortest-roundtrip floats."""
        buf = io.StringIO()
        buf.write(",".join(self.feature_names + ("stroke",)) + "\n")
        for i in range(self.n_rows):
            cells = [repr(float(v)) for v in self.X[i]]
            cells.append(str(int(self.y[i])))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue().encode()

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv_bytes()).hexdigest()[:16]


def encode(records: list[EHRRecord], emap: EncodingMap, source: str = "") -> EncodedMatrix:
    """Encode records into the fixed 10-feature design matrix plus labels.

    Missing BMI cells are replaced by the fitted imputation value; a
    categorical level absent from the map raises :class:`UnknownLevel`.
    """
    if not records:
        raise EmptyInput("no records to encode")
    n = len(records)
    X = np.empty((n, len(FEATURE_COLUMNS)), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    for i, r in enumerate(records):
        X[i] = (
            emap.code("gender", r.gender),
            r.age,
            r.hypertension,
            r.heart_disease,
            emap.code("ever_married", r.ever_married),
            emap.code("work_type", r.work_type),
            emap.code("residence_type", r.residence_type),
            r.avg_glucose_level,
            emap.bmi_fill if r.bmi is None else r.bmi,
            emap.code("smoking_status", r.smoking_status),
        )
        y[i] = r.stroke
    return EncodedMatrix(
        X=X, y=y, feature_names=FEATURE_COLUMNS, source=source, encoding_digest=emap.digest()
    )


def load_dataset(path: str | Path) -> tuple[EncodedMatrix, EncodingMap, ParseResult]:
    """Parse, fit the encoding, and encode a CSV in one step."""
    parsed = parse_csv(path)
    if not parsed.records:
        raise EmptyInput(f"no parseable rows in {path}")
    emap = fit_encoding(parsed.records)
    matrix = encode(parsed.records, emap, source=str(path))
    return matrix, emap, parsed


# --- synthetic cohort -------------------------------------------------------
#
# The generator mimics the published marginals of the public stroke EHR
# dataset (age roughly uniform up to 85, log-normal-like glucose with a
# high secondary mode, hypertension ~5% in the young rising with age) and
# its dependence structure (marriage/work coupled to age, stroke risk
# concentrated at high age with cardiovascular and glucose contributions).
# The *_P constants below were calibrated against the dataset summaries.

_WORK_LEVELS = ("children", "Govt_job", "Never_worked", "Private", "Self-employed")
_SMOKE_LEVELS = ("formerly smoked", "never smoked", "smokes", "Unknown")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def synthesize(n: int, class_balance: float, seed: int) -> list[EHRRecord]:
    """Generate a deterministic synthetic cohort of ``n`` EHR records.

    Exactly ``round(n * class_balance)`` records carry a positive stroke
    label; positives are drawn without replacement with probability
    proportional to a latent risk dominated by age.

    Raises:
        EmptyInput: n < 2.
        InvalidBalance: class_balance outside (0, 1).
    """
    if n < 2:
        raise EmptyInput("need at least 2 records")
    if not 0.0 < class_balance < 1.0:
        raise InvalidBalance(f"class_balance must be in (0, 1), got {class_balance}")
    n_pos = int(np.floor(n * class_balance + 0.5))

    rng = np.random.default_rng(seed)
    age = np.round(rng.uniform(0.25, 85.0, n), 2)

    gender = rng.choice(np.array(["Female", "Male", "Other"]), size=n, p=(0.586, 0.41, 0.004))
    male = gender == "Male"

    p_married = np.where(age < 17.0, 0.0, 0.80 * _sigmoid((age - 30.0) / 9.5))
    married = rng.random(n) < p_married

    work = _draw_work(rng, age)
    residence = np.where(rng.random(n) < 0.508, "Urban", "Rural")

    p_ht = 0.045 + 0.27 * _sigmoid((age - 60.0) / 10.0)
    hypertension = (rng.random(n) < p_ht).astype(int)
    p_hd = (0.01 + 0.24 * _sigmoid((age - 64.0) / 7.5)) * np.where(male, 1.4, 0.8)
    heart_disease = (rng.random(n) < np.clip(p_hd, 0.0, 1.0)).astype(int)

    p_hi_glucose = np.clip(
        0.03 + 0.24 * _sigmoid((age - 60.0) / 10.0) + 0.06 * hypertension, 0.0, 1.0
    )
    hi = rng.random(n) < p_hi_glucose
    log_ag = np.where(
        hi,
        rng.normal(5.35, 0.16, n),
        rng.normal(4.50, 0.21, n) + 0.045 * male,
    )
    glucose = np.round(np.clip(np.exp(log_ag), 55.0, 290.0), 2)

    bmi_mean = 21.5 + 7.0 * _sigmoid((age - 28.0) / 9.0)
    bmi = np.round(np.clip(rng.normal(bmi_mean, 6.0, n), 12.5, 78.0), 1)
    bmi_missing = rng.random(n) < 0.039

    smoking = _draw_smoking(rng, age, male)

    # Risk is conjunctive (age multiplied by the cardiovascular, glucose,
    # and U-shaped BMI burden), which keeps the label from being linearly
    # separable while leaving age the dominant single signal.
    glucose_load = _sigmoid((glucose - 170.0) / 20.0)
    bmi_load = _sigmoid((bmi - 33.0) / 2.5) + _sigmoid((17.5 - bmi) / 2.0)
    risk = 0.07 + _sigmoid((age - 59.0) / 6.5) * (
        1.25
        + 0.45 * hypertension
        + 0.75 * heart_disease
        + 0.95 * glucose_load
        + 0.35 * bmi_load
    )
    stroke = np.zeros(n, dtype=int)
    if n_pos > 0:
        gumbel = rng.gumbel(size=n)
        stroke[np.argsort(-(risk / 0.58 + gumbel), kind="stable")[:n_pos]] = 1

    records = []
    for i in range(n):
        records.append(
            EHRRecord(
                id=f"S{i + 1:06d}",
                gender=str(gender[i]),
                age=float(age[i]),
                hypertension=int(hypertension[i]),
                heart_disease=int(heart_disease[i]),
                ever_married="Yes" if married[i] else "No",
                work_type=str(work[i]),
                residence_type=str(residence[i]),
                avg_glucose_level=float(glucose[i]),
                bmi=None if bmi_missing[i] else float(bmi[i]),
                smoking_status=str(smoking[i]),
                stroke=int(stroke[i]),
            )
        )
    return records


def _draw_work(rng: np.random.Generator, age: np.ndarray) -> np.ndarray:
    n = len(age)
    u = rng.random(n)
    out = np.empty(n, dtype=object)
    child = age < 13.0
    out[child] = np.where(u[child] < 0.97, "children", "Never_worked")
    teen = (age >= 13.0) & (age < 18.0)
    out[teen] = _pick(
        u[teen], ("children", "Private", "Never_worked", "Govt_job"), (0.60, 0.22, 0.13, 0.05)
    )
    young = (age >= 18.0) & (age < 25.0)
    out[young] = _pick(
        u[young], ("Private", "Govt_job", "Never_worked", "Self-employed"), (0.60, 0.15, 0.05, 0.20)
    )
    adult = age >= 25.0
    # Both the low work code (government) and the high one (self-employment)
    # rise with age, which keeps the overall work/age coupling moderate.
    p_govt = 0.16 + 0.17 * _sigmoid((age[adult] - 52.0) / 12.0)
    p_self = 0.14 + 0.17 * _sigmoid((age[adult] - 56.0) / 12.0)
    p_never = np.full(p_self.shape, 0.004)
    p_private = 1.0 - p_govt - p_self - p_never
    thresholds = np.cumsum(np.stack([p_govt, p_never, p_private], axis=1), axis=1)
    ua = u[adult]
    out[adult] = np.select(
        [ua < thresholds[:, 0], ua < thresholds[:, 1], ua < thresholds[:, 2]],
        ["Govt_job", "Never_worked", "Private"],
        default="Self-employed",
    )
    return out


def _pick(u: np.ndarray, levels: tuple[str, ...], probs: tuple[float, ...]) -> np.ndarray:
    edges = np.cumsum(probs)
    idx = np.searchsorted(edges, u, side="right").clip(0, len(levels) - 1)
    return np.array(levels, dtype=object)[idx]


def _draw_smoking(rng: np.random.Generator, age: np.ndarray, male: np.ndarray) -> np.ndarray:
    n = len(age)
    u = rng.random(n)
    out = np.empty(n, dtype=object)
    minor = age < 18.0
    out[minor] = _pick(u[minor], _SMOKE_LEVELS, (0.01, 0.36, 0.02, 0.61))
    grown = ~minor
    smoke_shift = np.where(male[grown], 0.07, -0.04)
    p_smokes = 0.155 + smoke_shift
    p_former = 0.185 + 0.5 * smoke_shift
    p_never = 0.40 - 1.5 * smoke_shift
    stacked = np.stack([p_former, p_never, p_smokes], axis=1)
    edges = np.cumsum(stacked, axis=1)
    ug = u[grown]
    out[grown] = np.select(
        [ug < edges[:, 0], ug < edges[:, 1], ug < edges[:, 2]],
        ["formerly smoked", "never smoked", "smokes"],
        default="Unknown",
    )
    return out


def records_to_csv(records: list[EHRRecord], path: str | Path) -> None:
    """Write records in the canonical 12-column CSV layout ("N/A" for missing BMI)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.id,
                    r.gender,
                    repr(r.age),
                    r.hypertension,
                    r.heart_disease,
                    r.ever_married,
                    r.work_type,
                    r.residence_type,
                    repr(r.avg_glucose_level),
                    "N/A" if r.bmi is None else repr(r.bmi),
                    r.smoking_status,
                    r.stroke,
                ]
            )
