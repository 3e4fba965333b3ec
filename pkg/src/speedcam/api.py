"""HTTP service wrapping the pipeline.

Each endpoint performs one pipeline stage on the server's filesystem and
returns a JSON summary. Input problems (bad documents, bad arguments, missing
files) map to 400; runtime/data failures (rank deficiency, unusable samples,
infeasible ranges) map to 422. The CLI is a thin client of this app.
"""

from __future__ import annotations

import csv
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import USAGE_ERRORS, SpeedcamError, ValidationError
from .features import (
    ExtractionConfig,
    SampleRecord,
    extract_dataset,
    read_features_table,
    write_features_table,
)
from .interchange import read_manifest
from .regression import (
    BASE_FEATURE_NAMES,
    EvaluationReport,
    FitResult,
    evaluate,
    feature_importance,
    fit_speed_model,
    load_model,
    predict,
    save_model,
)
from .synth import NoiseParams, ScenarioRanges, generate_dataset

app = FastAPI(title="speedcam", version=__version__)


@app.exception_handler(SpeedcamError)
async def speedcam_error_handler(_: Request, exc: SpeedcamError) -> JSONResponse:
    status = 400 if isinstance(exc, USAGE_ERRORS) else 422
    return JSONResponse(
        status_code=status,
        content={"detail": str(exc), "error": type(exc).__name__},
    )


@app.exception_handler(RequestValidationError)
async def request_validation_handler(
    _: Request, exc: RequestValidationError
) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"detail": str(exc), "error": "RequestValidationError"},
    )


class HealthResponse(BaseModel):
    status: str
    version: str


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


# --- synth -------------------------------------------------------------------


class SynthRequest(BaseModel):
    n: int = Field(ge=0)
    out_dir: str
    seed: int = Field(default=0, ge=0)
    speed_range: tuple[float, float] = (5.0, 60.0)
    duration_range: tuple[float, float] = (2.0, 6.0)
    distance_range: tuple[float, float] = (110.0, 170.0)
    focal_px: float = Field(default=200.0, gt=0)
    vehicle_width_m: float = Field(default=1.8, gt=0)
    vehicle_height_m: float = Field(default=1.5, gt=0)
    fps: float = Field(default=10.0, gt=0)
    image_width: int = Field(default=64, ge=1)
    image_height: int = Field(default=48, ge=1)
    depth_mode: str = Field(default="metric", pattern="^(metric|inverse_relative)$")
    bbox_sigma_px: float = Field(default=0.0, ge=0)
    depth_sigma: float = Field(default=0.0, ge=0)


class SynthResponse(BaseModel):
    sample_count: int
    seed: int
    manifest_path: str


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    ranges = ScenarioRanges(
        speed_kmh=req.speed_range,
        duration_s=req.duration_range,
        initial_distance_m=req.distance_range,
        focal_px=req.focal_px,
        vehicle_width_m=req.vehicle_width_m,
        vehicle_height_m=req.vehicle_height_m,
        fps=req.fps,
        image_size=(req.image_width, req.image_height),
        depth_mode=req.depth_mode,
        noise=NoiseParams(bbox_sigma_px=req.bbox_sigma_px, depth_sigma=req.depth_sigma),
    )
    manifest_path = generate_dataset(req.n, ranges, req.seed, req.out_dir)
    return SynthResponse(
        sample_count=req.n, seed=req.seed, manifest_path=str(manifest_path)
    )


# --- extract -------------------------------------------------------------------


class ExtractRequest(BaseModel):
    manifest_path: str
    features_path: str
    confidence_threshold: float = Field(default=0.7, ge=0.0, le=1.0)
    depth_region: str = Field(default="mask", pattern="^(mask|bbox)$")
    accepted_classes: list[str] = ["car"]
    primary_selection: str = Field(
        default="max_area", pattern="^(max_area|max_confidence)$"
    )


class SkippedSample(BaseModel):
    sample_id: str
    reason: str


class ExtractResponse(BaseModel):
    extracted: int
    skipped: list[SkippedSample]
    features_path: str


@app.post("/extract", response_model=ExtractResponse)
def extract(req: ExtractRequest) -> ExtractResponse:
    manifest = read_manifest(req.manifest_path)
    config = ExtractionConfig(
        confidence_threshold=req.confidence_threshold,
        accepted_classes=frozenset(req.accepted_classes),
        depth_region=req.depth_region,
        primary_selection=req.primary_selection,
    )
    records, skipped = extract_dataset(manifest, config)
    write_features_table(records, req.features_path)
    return ExtractResponse(
        extracted=len(records),
        skipped=[SkippedSample(sample_id=s, reason=r) for s, r in skipped],
        features_path=req.features_path,
    )


# --- fit ------------------------------------------------------------------------


class MetricsBlock(BaseModel):
    r2: float
    adj_r2: float | None
    rmse: float
    n: int
    p: int


class ImportanceItem(BaseModel):
    feature: str
    importance: float


class FitRequest(BaseModel):
    features_path: str
    model_path: str
    degree: int = Field(default=3, ge=1, le=3)
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    seed: int = 42
    base_features: list[str] = list(BASE_FEATURE_NAMES)


class FitResponse(BaseModel):
    model_path: str
    train: MetricsBlock
    test: MetricsBlock
    importance: list[ImportanceItem]


def _metrics_block(report: EvaluationReport) -> MetricsBlock:
    return MetricsBlock(
        r2=report.r2, adj_r2=report.adj_r2, rmse=report.rmse, n=report.n, p=report.p
    )


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest) -> FitResponse:
    records = read_features_table(req.features_path)
    result = fit_speed_model(
        records,
        degree=req.degree,
        test_fraction=req.test_fraction,
        seed=req.seed,
        base_features=tuple(req.base_features),
    )
    save_model(result, req.model_path)
    return FitResponse(
        model_path=req.model_path,
        train=_metrics_block(result.train_report),
        test=_metrics_block(result.test_report),
        importance=[
            ImportanceItem(feature=name, importance=value)
            for name, value in result.importance
        ],
    )


# --- eval -------------------------------------------------------------------------


class EvalRequest(BaseModel):
    model_path: str
    features_path: str
    output_path: str | None = None


class EvalRow(BaseModel):
    sample_id: str
    speed_kmh: float
    predicted_kmh: float
    residual: float


class EvalResponse(BaseModel):
    metrics: MetricsBlock
    rows: list[EvalRow]
    output_path: str | None


@app.post("/eval", response_model=EvalResponse)
def eval_model(req: EvalRequest) -> EvalResponse:
    model, _ = load_model(req.model_path)
    records = read_features_table(req.features_path)
    report = evaluate(model, records)
    rows = [
        EvalRow(
            sample_id=r.sample_id,
            speed_kmh=r.speed_kmh,
            predicted_kmh=predict(model, r),
            residual=residual,
        )
        for r, residual in zip(records, report.residuals)
    ]
    rows.sort(key=lambda row: row.sample_id)
    if req.output_path:
        with open(req.output_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample_id", "speed_kmh", "predicted_kmh", "residual"])
            for row in rows:
                writer.writerow(
                    [
                        row.sample_id,
                        repr(row.speed_kmh),
                        repr(row.predicted_kmh),
                        repr(row.residual),
                    ]
                )
    return EvalResponse(
        metrics=_metrics_block(report), rows=rows, output_path=req.output_path
    )


# --- predict -------------------------------------------------------------------------


class PredictRecord(BaseModel):
    sample_id: str = ""
    t: float = Field(gt=0)
    area_diff: float
    dist_diff: float


class PredictRequest(BaseModel):
    model_path: str
    features_path: str | None = None
    records: list[PredictRecord] | None = None
    output_path: str | None = None


class Prediction(BaseModel):
    sample_id: str
    predicted_kmh: float
    negative: bool


class PredictResponse(BaseModel):
    predictions: list[Prediction]
    output_path: str | None


@app.post("/predict", response_model=PredictResponse)
def predict_endpoint(req: PredictRequest) -> PredictResponse:
    model, _ = load_model(req.model_path)
    if (req.features_path is None) == (req.records is None):
        raise ValidationError("provide exactly one of features_path or records")
    if req.features_path is not None:
        records = read_features_table(req.features_path)
    else:
        records = [
            SampleRecord(
                sample_id=r.sample_id, t=r.t, area_diff=r.area_diff, dist_diff=r.dist_diff
            )
            for r in req.records
        ]
    predictions = [
        Prediction(
            sample_id=r.sample_id,
            predicted_kmh=(value := predict(model, r)),
            negative=value < 0,
        )
        for r in records
    ]
    predictions.sort(key=lambda p: p.sample_id)
    if req.output_path:
        with open(req.output_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample_id", "predicted_kmh", "flag"])
            for p in predictions:
                writer.writerow(
                    [p.sample_id, repr(p.predicted_kmh), "negative" if p.negative else ""]
                )
    return PredictResponse(predictions=predictions, output_path=req.output_path)


# --- report ---------------------------------------------------------------------------


class ReportRequest(BaseModel):
    model_path: str
    features_path: str | None = None
    output_path: str | None = None


class ReportResponse(BaseModel):
    text: str
    output_path: str | None


def _format_metric(value: float | None) -> str:
    return "" if value is None else repr(value)


def build_report(
    model_path: str, features_path: str | None
) -> str:
    """Tab-delimited summary: metric blocks, importance ranking, and (when a
    features table is given) actual-vs-predicted rows for external plotting."""
    model, metrics = load_model(model_path)
    lines = ["# model metrics", "split\tr2\tadj_r2\trmse\tn\tp"]
    for split in ("train", "test"):
        block = metrics.get(split, {})
        lines.append(
            "\t".join(
                [
                    split,
                    _format_metric(block.get("r2")),
                    _format_metric(block.get("adj_r2")),
                    _format_metric(block.get("rmse")),
                    str(block.get("n", "")),
                    str(block.get("p", "")),
                ]
            )
        )
    lines.append("# feature importance")
    lines.append("rank\tfeature\timportance")
    for rank, (name, value) in enumerate(feature_importance(model), start=1):
        lines.append(f"{rank}\t{name}\t{value!r}")
    if features_path is not None:
        records = read_features_table(features_path)
        labeled = [r for r in records if r.speed_kmh is not None]
        lines.append("# actual_vs_predicted")
        lines.append("sample_id\tspeed_kmh\tpredicted_kmh\tresidual")
        for r in sorted(labeled, key=lambda r: r.sample_id):
            value = predict(model, r)
            lines.append(
                f"{r.sample_id}\t{r.speed_kmh!r}\t{value!r}\t{(r.speed_kmh - value)!r}"
            )
    return "\n".join(lines) + "\n"


@app.post("/report", response_model=ReportResponse)
def report(req: ReportRequest) -> ReportResponse:
    text = build_report(req.model_path, req.features_path)
    if req.output_path:
        Path(req.output_path).write_text(text)
    return ReportResponse(text=text, output_path=req.output_path)
