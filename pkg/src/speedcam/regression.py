"""Least-squares speed models over (t, area_diff, dist_diff).

The degree-1 model is

    speed = b0 + b1*t + b2*area_diff + b3*dist_diff + error

and higher degrees (capped at 3) expand the same base features into every
monomial t^a * area_diff^b * dist_diff^c with 1 <= a+b+c <= degree, in graded
lexicographic order. Fitting minimizes the sum of squared residuals through an
orthogonal factorization (never raw normal equations); numerical rank
deficiency is a hard error naming the offending columns, not a silent
pseudo-inverse. Coefficients stay in natural units; per-feature training
means/stds are recorded so feature importance can be reported as
|coefficient| * std.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateDofError,
    IoError,
    MissingFileError,
    ParseError,
    RankDeficiencyError,
    SchemaMismatchError,
    TooFewSamplesError,
    ValidationError,
    ZeroVarianceError,
)
from .features import SampleRecord

BASE_FEATURE_NAMES = ("t", "area_diff", "dist_diff")
MAX_DEGREE = 3

# Singular values below max_singular * this factor count as zero.
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class MonomialDescriptor:
    """One monomial t^a * area_diff^b * dist_diff^c of the expansion."""

    exponents: tuple[int, int, int]
    display_name: str


@dataclass
class RegressionModel:
    degree: int
    monomials: list[MonomialDescriptor]
    coefficients: list[float]
    intercept: float
    feature_means: list[float]
    feature_stds: list[float]
    split_seed: int = 0
    train_fraction: float = 1.0


@dataclass
class EvaluationReport:
    r2: float
    adj_r2: float | None
    rmse: float
    n: int
    p: int
    residuals: list[float]


def _display_name(exponents: tuple[int, int, int]) -> str:
    parts = [(name, e) for name, e in zip(BASE_FEATURE_NAMES, exponents) if e > 0]
    if len(parts) == 1:
        name, e = parts[0]
        return f"{name}^{e}"
    return "*".join(name if e == 1 else f"{name}^{e}" for name, e in parts)


def monomial_descriptors(
    degree: int, base_features: tuple[str, ...] = BASE_FEATURE_NAMES
) -> list[MonomialDescriptor]:
    """Canonical ordered monomials of total degree 1..degree.

    Order is graded lexicographic on (e_t, e_area, e_dist): lower total degree
    first, then lexicographically descending exponent tuples, so degree 1
    yields exactly t, area_diff, dist_diff. `base_features` restricts the
    expansion to a subset of the base features (used for ablations); excluded
    features keep exponent 0 everywhere.
    """
    if degree not in range(1, MAX_DEGREE + 1):
        raise ValidationError(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
    unknown = set(base_features) - set(BASE_FEATURE_NAMES)
    if unknown:
        raise ValidationError(f"unknown base features {sorted(unknown)}")
    if not base_features:
        raise ValidationError("base_features must be nonempty")
    allowed = [name in base_features for name in BASE_FEATURE_NAMES]
    descriptors = []
    for total in range(1, degree + 1):
        for a in range(total, -1, -1):
            for b in range(total - a, -1, -1):
                c = total - a - b
                exps = (a, b, c)
                if any(e > 0 and not ok for e, ok in zip(exps, allowed)):
                    continue
                descriptors.append(MonomialDescriptor(exps, _display_name(exps)))
    return descriptors


def monomial_value(descriptor: MonomialDescriptor, record: SampleRecord) -> float:
    a, b, c = descriptor.exponents
    return record.t**a * record.area_diff**b * record.dist_diff**c


def expand_polynomial(
    record: SampleRecord,
    degree: int,
    base_features: tuple[str, ...] = BASE_FEATURE_NAMES,
) -> tuple[np.ndarray, list[MonomialDescriptor]]:
    """Feature vector for one record plus the descriptors that label it.

    The constant term is excluded; the intercept is handled by the fit.
    """
    descriptors = monomial_descriptors(degree, base_features)
    values = np.array([monomial_value(d, record) for d in descriptors], dtype=np.float64)
    return values, descriptors


def design_matrix(
    records: list[SampleRecord], descriptors: list[MonomialDescriptor]
) -> np.ndarray:
    return np.array(
        [[monomial_value(d, r) for d in descriptors] for r in records], dtype=np.float64
    )


def fit_least_squares(
    features: np.ndarray,
    targets: np.ndarray,
    monomials: list[MonomialDescriptor],
    degree: int,
    split_seed: int = 0,
    train_fraction: float = 1.0,
) -> RegressionModel:
    """Ordinary least squares with an intercept column.

    Solved via SVD (numpy lstsq); before solving, the singular spectrum of the
    intercept-augmented design matrix is checked and a numerical rank below
    p+1 raises RankDeficiencyError naming the offending columns (identified by
    column-pivoted QR).
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("features must be a 2-D matrix")
    n, p = X.shape
    if p != len(monomials):
        raise ValidationError(f"{p} feature columns but {len(monomials)} monomials")
    if y.shape != (n,):
        raise ValidationError(f"targets shape {y.shape} does not match {n} rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("features and targets must be finite")
    if n < p + 1:
        raise TooFewSamplesError(f"need at least p+1={p + 1} rows, got {n}")

    design = np.column_stack([np.ones(n), X])
    singular = np.linalg.svd(design, compute_uv=False)
    cutoff = singular.max(initial=0.0) * RANK_TOLERANCE
    rank = int((singular > cutoff).sum())
    if rank < p + 1:
        _, _, pivots = scipy.linalg.qr(design, mode="economic", pivoting=True)
        names = ["intercept"] + [m.display_name for m in monomials]
        offending = sorted(names[j] for j in pivots[rank:])
        raise RankDeficiencyError(
            f"design matrix rank {rank} < {p + 1}; dependent columns: {offending}",
            columns=offending,
        )
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return RegressionModel(
        degree=degree,
        monomials=list(monomials),
        coefficients=[float(b) for b in beta[1:]],
        intercept=float(beta[0]),
        feature_means=[float(m) for m in X.mean(axis=0)],
        feature_stds=[float(s) for s in X.std(axis=0)],
        split_seed=split_seed,
        train_fraction=train_fraction,
    )


def predict(model: RegressionModel, record: SampleRecord) -> float:
    """Evaluate the fitted polynomial; negative outputs are reported as-is."""
    total = model.intercept
    for coef, mono in zip(model.coefficients, model.monomials):
        total += coef * monomial_value(mono, record)
    return total


def predict_many(model: RegressionModel, records: list[SampleRecord]) -> np.ndarray:
    return np.array([predict(model, r) for r in records], dtype=np.float64)


# --- metrics -------------------------------------------------------------


def r_squared(actual, predicted) -> float:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.size == 0:
        raise ValidationError("actual and predicted must be equal-length and nonempty")
    ss_tot = float(((a - a.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVarianceError("R^2 undefined: actual values are constant")
    ss_res = float(((a - p) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def adjusted_r_squared(r2: float, n: int, p: int) -> float:
    if n <= p + 1:
        raise DegenerateDofError(f"adjusted R^2 needs n > p+1, got n={n}, p={p}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def rmse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.size == 0:
        raise ValidationError("actual and predicted must be equal-length and nonempty")
    return float(np.sqrt(((a - p) ** 2).mean()))


def evaluate(model: RegressionModel, records: list[SampleRecord]) -> EvaluationReport:
    """Metrics and residuals of a model on labeled records.

    adj_r2 is None when the sample count cannot support it (n <= p+1).
    """
    unlabeled = [r.sample_id for r in records if r.speed_kmh is None]
    if unlabeled:
        raise ValidationError(f"records without ground-truth speed: {unlabeled[:5]}")
    actual = np.array([r.speed_kmh for r in records], dtype=np.float64)
    predicted = predict_many(model, records)
    n = len(records)
    p = len(model.monomials)
    r2 = r_squared(actual, predicted)
    try:
        adj = adjusted_r_squared(r2, n, p)
    except DegenerateDofError:
        adj = None
    return EvaluationReport(
        r2=r2,
        adj_r2=adj,
        rmse=rmse(actual, predicted),
        n=n,
        p=p,
        residuals=[float(v) for v in actual - predicted],
    )


# --- split and importance ---------------------------------------------------


def train_test_split(
    records: list[SampleRecord], test_fraction: float, seed: int
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Seeded shuffle-and-partition.

    The shuffle is numpy's Fisher-Yates permutation driven by PCG64 seeded
    with `seed`, so partitions reproduce anywhere. Test size is
    round-half-up(n * test_fraction) clamped to [1, n-1].
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(records)
    if n < 2:
        raise TooFewSamplesError(f"need >= 2 records to split, got {n}")
    k = int(math.floor(n * test_fraction + 0.5))
    k = min(max(k, 1), n - 1)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    test = [records[i] for i in perm[:k]]
    train = [records[i] for i in perm[k:]]
    return train, test


def feature_importance(model: RegressionModel) -> list[tuple[str, float]]:
    """Standardized-coefficient magnitudes |coef| * std, ranked descending.

    Ties break on canonical monomial order, so the ranking is deterministic
    and invariant to affine rescaling of any feature column.
    """
    scored = [
        (mono.display_name, abs(coef) * std, idx)
        for idx, (mono, coef, std) in enumerate(
            zip(model.monomials, model.coefficients, model.feature_stds)
        )
    ]
    scored.sort(key=lambda item: (-item[1], item[2]))
    return [(name, importance) for name, importance, _ in scored]


# --- fit pipeline and model file ---------------------------------------------


@dataclass
class FitResult:
    model: RegressionModel
    train_report: EvaluationReport
    test_report: EvaluationReport
    importance: list[tuple[str, float]]


def fit_speed_model(
    records: list[SampleRecord],
    degree: int = 3,
    test_fraction: float = 0.2,
    seed: int = 42,
    base_features: tuple[str, ...] = BASE_FEATURE_NAMES,
) -> FitResult:
    """Split, fit on the training part, evaluate on both parts."""
    unlabeled = [r.sample_id for r in records if r.speed_kmh is None]
    if unlabeled:
        raise ValidationError(
            f"cannot fit: records without ground-truth speed: {unlabeled[:5]}"
        )
    descriptors = monomial_descriptors(degree, base_features)
    train, test = train_test_split(records, test_fraction, seed)
    X_train = design_matrix(train, descriptors)
    y_train = np.array([r.speed_kmh for r in train], dtype=np.float64)
    model = fit_least_squares(
        X_train,
        y_train,
        descriptors,
        degree,
        split_seed=seed,
        train_fraction=1.0 - test_fraction,
    )
    return FitResult(
        model=model,
        train_report=evaluate(model, train),
        test_report=evaluate(model, test),
        importance=feature_importance(model),
    )


def _metrics_dict(report: EvaluationReport) -> dict:
    return {
        "r2": report.r2,
        "adj_r2": report.adj_r2,
        "rmse": report.rmse,
        "n": report.n,
        "p": report.p,
    }


def save_model(result: FitResult, path: str | Path) -> None:
    """Serialize a fitted model plus its train/test metric blocks.

    JSON with repr-format floats: decimal serialization at full round-trip
    precision, so loading reproduces every coefficient bit-exactly.
    """
    model = result.model
    doc = {
        "format_version": 1,
        "degree": model.degree,
        "monomials": [
            {"exponents": list(m.exponents), "display_name": m.display_name}
            for m in model.monomials
        ],
        "intercept": model.intercept,
        "coefficients": model.coefficients,
        "feature_means": model.feature_means,
        "feature_stds": model.feature_stds,
        "split_seed": model.split_seed,
        "train_fraction": model.train_fraction,
        "metrics": {
            "train": _metrics_dict(result.train_report),
            "test": _metrics_dict(result.test_report),
        },
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path: str | Path) -> tuple[RegressionModel, dict]:
    """Load a model file; returns (model, metrics-block dict)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    try:
        if doc["format_version"] != 1:
            raise SchemaMismatchError(f"{path}: unsupported format_version")
        degree = doc["degree"]
        monomials = [
            MonomialDescriptor(tuple(m["exponents"]), m["display_name"])
            for m in doc["monomials"]
        ]
        model = RegressionModel(
            degree=degree,
            monomials=monomials,
            coefficients=[float(c) for c in doc["coefficients"]],
            intercept=float(doc["intercept"]),
            feature_means=[float(v) for v in doc["feature_means"]],
            feature_stds=[float(v) for v in doc["feature_stds"]],
            split_seed=int(doc["split_seed"]),
            train_fraction=float(doc["train_fraction"]),
        )
        metrics = doc["metrics"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatchError(f"{path}: malformed model document ({exc})") from exc
    _validate_model(model, str(path))
    return model, metrics


def _validate_model(model: RegressionModel, context: str) -> None:
    if model.degree not in range(1, MAX_DEGREE + 1):
        raise SchemaMismatchError(f"{context}: degree {model.degree} outside [1, {MAX_DEGREE}]")
    if len(model.coefficients) != len(model.monomials):
        raise SchemaMismatchError(
            f"{context}: {len(model.coefficients)} coefficients for {len(model.monomials)} monomials"
        )
    if len(model.feature_means) != len(model.monomials) or len(model.feature_stds) != len(
        model.monomials
    ):
        raise SchemaMismatchError(f"{context}: feature statistics length mismatch")
    seen = set()
    for m in model.monomials:
        if len(m.exponents) != 3 or any(
            not isinstance(e, int) or e < 0 for e in m.exponents
        ):
            raise SchemaMismatchError(f"{context}: bad exponents {m.exponents}")
        total = sum(m.exponents)
        if not 1 <= total <= model.degree:
            raise SchemaMismatchError(
                f"{context}: monomial {m.display_name} degree {total} outside [1, {model.degree}]"
            )
        if m.exponents in seen:
            raise SchemaMismatchError(f"{context}: duplicate monomial {m.exponents}")
        seen.add(m.exponents)
    if any(s < 0 for s in model.feature_stds):
        raise SchemaMismatchError(f"{context}: negative feature std")
