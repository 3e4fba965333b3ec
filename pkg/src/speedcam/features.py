"""Reduce a frame sequence to the regression inputs: duration t, bbox area
change, and region-averaged depth change.

The protocol uses only the first and last usable frames of a sample. A frame
is usable when a primary vehicle survives the class/confidence filter and the
rasters the configured depth region needs are attached; when an endpoint frame
is unusable the scan moves inward to the nearest usable frame and the indices
actually used are recorded on the output record. Both differences follow the
first-minus-last convention; the regression absorbs the resulting signs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyRegionError,
    InsufficientFramesError,
    MissingFileError,
    NoVehicleError,
    SchemaMismatchError,
    ValidationError,
)
from .interchange import (
    DatasetManifest,
    Detection,
    DepthRaster,
    FrameObservation,
    MaskRaster,
    read_depth_raster,
    read_mask_raster,
)

FEATURES_HEADER = (
    "sample_id",
    "t_seconds",
    "area_diff_px2",
    "dist_diff_depth",
    "speed_kmh",
    "perspective",
)


@dataclass
class SampleRecord:
    """One video reduced to the regressor's inputs."""

    sample_id: str
    t: float
    area_diff: float
    dist_diff: float
    speed_kmh: float | None = None
    perspective: str = "unknown"
    # Frame indices actually used after any inward scan; informational only,
    # not part of the features table.
    first_frame_index: int | None = None
    last_frame_index: int | None = None


@dataclass(frozen=True)
class ExtractionConfig:
    confidence_threshold: float = 0.7
    accepted_classes: frozenset[str] = frozenset({"car"})
    depth_region: str = "mask"  # "mask" | "bbox"
    primary_selection: str = "max_area"  # "max_area" | "max_confidence"

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError(
                f"confidence_threshold {self.confidence_threshold} outside [0, 1]"
            )
        if not self.accepted_classes:
            raise ValidationError("accepted_classes must be nonempty")
        if self.depth_region not in ("mask", "bbox"):
            raise ValidationError(f"depth_region {self.depth_region!r} not in (mask, bbox)")
        if self.primary_selection not in ("max_area", "max_confidence"):
            raise ValidationError(
                f"primary_selection {self.primary_selection!r} not in (max_area, max_confidence)"
            )


def bbox_area(d: Detection) -> float:
    """Bounding-box area in px^2; zero for degenerate boxes."""
    x1, y1, x2, y2 = d.bbox
    return (x2 - x1) * (y2 - y1)


def select_primary_vehicle(
    detections: list[Detection], config: ExtractionConfig
) -> Detection:
    """Pick the subject vehicle among filtered detections.

    Detections are kept when their class is accepted and confidence is
    strictly above the threshold (0.7 keeps only >0.7, dropping mirrors and
    other spurious boxes). Among survivors the configured criterion wins,
    with a deterministic tie-break on (confidence desc, x1 asc, y1 asc), so
    permuting the input never changes the result.
    """
    survivors = [
        d
        for d in detections
        if d.class_label in config.accepted_classes
        and d.confidence > config.confidence_threshold
    ]
    if not survivors:
        raise NoVehicleError(
            f"no detection with class in {sorted(config.accepted_classes)} and "
            f"confidence > {config.confidence_threshold}"
        )
    if config.primary_selection == "max_area":
        criterion = bbox_area
    else:
        criterion = lambda d: d.confidence  # noqa: E731
    return max(
        survivors,
        key=lambda d: (criterion(d), d.confidence, -d.bbox[0], -d.bbox[1]),
    )


def bbox_pixel_bounds(
    bbox: tuple[float, float, float, float], width: int, height: int
) -> tuple[int, int, int, int]:
    """Pixel index ranges (x0, x1, y0, y1) covered by a bbox, clipped to the raster.

    A pixel is covered when its unit cell overlaps the box: columns
    [floor(x1), ceil(x2)) intersected with [0, width), rows likewise. The
    synthetic oracle rasterizes masks with this same rule so mask-mode and
    bbox-mode aggregation agree exactly on noiseless scenes.
    """
    x1, y1, x2, y2 = bbox
    x0 = max(0, int(math.floor(x1)))
    x1p = min(width, int(math.ceil(x2)))
    y0 = max(0, int(math.floor(y1)))
    y1p = min(height, int(math.ceil(y2)))
    return x0, x1p, y0, y1p


def region_mean_depth(
    depth: DepthRaster,
    region: MaskRaster | tuple[float, float, float, float],
    mode: str = "mask",
) -> float:
    """Arithmetic mean depth over the vehicle region, in double precision.

    In mask mode the region is the mask's 1-pixels and the mask must match the
    depth raster's dimensions; in bbox mode it is every pixel of the bbox
    clipped to the raster.
    """
    if mode == "mask":
        if not isinstance(region, MaskRaster):
            raise ValidationError("mask mode requires a MaskRaster region")
        if (region.width, region.height) != (depth.width, depth.height):
            raise DimensionMismatchError(
                f"mask {region.width}x{region.height} vs depth {depth.width}x{depth.height}"
            )
        selected = depth.values[region.values == 1]
        if selected.size == 0:
            raise EmptyRegionError("mask has no vehicle pixels")
        return float(selected.astype(np.float64).mean())
    if mode == "bbox":
        if isinstance(region, MaskRaster):
            raise ValidationError("bbox mode requires a bbox tuple region")
        x0, x1p, y0, y1p = bbox_pixel_bounds(region, depth.width, depth.height)
        if x0 >= x1p or y0 >= y1p:
            raise EmptyRegionError("bbox clipped to the raster is empty")
        patch = depth.values[y0:y1p, x0:x1p]
        return float(patch.astype(np.float64).mean())
    raise ValidationError(f"unknown depth region mode {mode!r}")


def _frame_requirements_met(frame: FrameObservation, config: ExtractionConfig) -> bool:
    if frame.depth_path is None:
        return False
    if config.depth_region == "mask" and frame.mask_path is None:
        return False
    return True


def _endpoint_measurements(
    frame: FrameObservation, config: ExtractionConfig
) -> tuple[Detection, float] | None:
    """Primary detection and mean depth for a frame, or None when the frame
    is skippable (detector dropout or missing rasters)."""
    if not _frame_requirements_met(frame, config):
        return None
    try:
        primary = select_primary_vehicle(frame.detections, config)
    except NoVehicleError:
        return None
    depth = read_depth_raster(frame.depth_path)
    if config.depth_region == "mask":
        mask = read_mask_raster(frame.mask_path)
        mean = region_mean_depth(depth, mask, mode="mask")
    else:
        mean = region_mean_depth(depth, primary.bbox, mode="bbox")
    return primary, mean


def extract_sample(
    frames: list[FrameObservation],
    fps: float,
    config: ExtractionConfig | None = None,
    *,
    sample_id: str = "",
    speed_kmh: float | None = None,
    perspective: str = "unknown",
) -> SampleRecord:
    """First/last-frame reduction of one sample.

    t is the frame-index gap over fps; area_diff and dist_diff are the
    first-minus-last differences of bbox area and region mean depth. Frames
    strictly between the chosen endpoints never influence the result. Raster
    decode and region errors on a usable-looking frame propagate; only
    detector dropouts and missing raster attachments trigger the inward scan.
    """
    config = config or ExtractionConfig()
    if fps <= 0:
        raise ValidationError(f"fps must be > 0, got {fps}")
    ordered = sorted(frames, key=lambda f: f.frame_index)
    if len(ordered) < 2:
        raise InsufficientFramesError(f"need >= 2 frames, got {len(ordered)}")

    first = last = None
    first_pos = 0
    for pos, frame in enumerate(ordered):
        first = _endpoint_measurements(frame, config)
        if first is not None:
            first_pos = pos
            break
    if first is None:
        raise NoVehicleError("no usable frame in sample")
    for pos in range(len(ordered) - 1, first_pos, -1):
        last = _endpoint_measurements(ordered[pos], config)
        if last is not None:
            last_pos = pos
            break
    if last is None:
        raise NoVehicleError("no usable frame pair: only one usable frame")

    first_frame, last_frame = ordered[first_pos], ordered[last_pos]
    (det_first, mean_first), (det_last, mean_last) = first, last
    t = (last_frame.frame_index - first_frame.frame_index) / fps
    return SampleRecord(
        sample_id=sample_id,
        t=t,
        area_diff=bbox_area(det_first) - bbox_area(det_last),
        dist_diff=mean_first - mean_last,
        speed_kmh=speed_kmh,
        perspective=perspective,
        first_frame_index=first_frame.frame_index,
        last_frame_index=last_frame.frame_index,
    )


def extract_dataset(
    manifest: DatasetManifest, config: ExtractionConfig | None = None
) -> tuple[list[SampleRecord], list[tuple[str, str]]]:
    """Extract every sample, skipping failures.

    Returns (records, skipped) where skipped pairs each failed sample_id with
    the failure reason. Records come back sorted by sample_id.
    """
    config = config or ExtractionConfig()
    records: list[SampleRecord] = []
    skipped: list[tuple[str, str]] = []
    for sample in manifest.samples:
        try:
            record = extract_sample(
                sample.frames,
                sample.fps,
                config,
                sample_id=sample.sample_id,
                speed_kmh=sample.ground_truth_speed_kmh,
                perspective=sample.perspective,
            )
        except Exception as exc:  # per-sample failures are data, not fatal
            skipped.append((sample.sample_id, f"{type(exc).__name__}: {exc}"))
            continue
        records.append(record)
    records.sort(key=lambda r: r.sample_id)
    return records, skipped


# --- features table -----------------------------------------------------------


def _format_float(value: float) -> str:
    return repr(float(value))


def write_features_table(records: list[SampleRecord], path: str | Path) -> None:
    """Write the per-sample features table (CSV, sorted by sample_id)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURES_HEADER)
        for r in sorted(records, key=lambda r: r.sample_id):
            writer.writerow(
                [
                    r.sample_id,
                    _format_float(r.t),
                    _format_float(r.area_diff),
                    _format_float(r.dist_diff),
                    "" if r.speed_kmh is None else _format_float(r.speed_kmh),
                    r.perspective,
                ]
            )


def read_features_table(path: str | Path) -> list[SampleRecord]:
    """Read a features table back into records (speed empty -> unlabeled)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"features table not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: empty features table") from None
        if tuple(header) != FEATURES_HEADER:
            raise SchemaMismatchError(
                f"{path}: header {header} != expected {list(FEATURES_HEADER)}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FEATURES_HEADER):
                raise SchemaMismatchError(f"{path}:{lineno}: expected {len(FEATURES_HEADER)} columns")
            sample_id, t_s, area_s, dist_s, speed_s, perspective = row
            try:
                t = float(t_s)
                area_diff = float(area_s)
                dist_diff = float(dist_s)
                speed = None if speed_s == "" else float(speed_s)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad number ({exc})") from None
            if not (math.isfinite(t) and t > 0):
                raise ValidationError(f"{path}:{lineno}: t_seconds must be finite and > 0")
            if not (math.isfinite(area_diff) and math.isfinite(dist_diff)):
                raise ValidationError(f"{path}:{lineno}: features must be finite")
            if speed is not None and (not math.isfinite(speed) or speed < 0):
                raise ValidationError(f"{path}:{lineno}: speed_kmh must be finite and >= 0")
            records.append(
                SampleRecord(
                    sample_id=sample_id,
                    t=t,
                    area_diff=area_diff,
                    dist_diff=dist_diff,
                    speed_kmh=speed,
                    perspective=perspective,
                )
            )
    return records
