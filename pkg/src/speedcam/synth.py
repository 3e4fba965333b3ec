"""Pinhole-camera synthetic scenes with known ground-truth speed.

A vehicle of fixed physical size approaches the camera along the optical axis
at constant speed; its image is the axis-aligned rectangle

    width_px  = focal_px * vehicle_width_m  / Z(t)
    height_px = focal_px * vehicle_height_m / Z(t)
    Z(t)      = initial_distance_m - (speed_kmh / 3.6) * t

centered horizontally and anchored to the bottom of that rectangle's ground
line. Each frame yields a detection (confidence 0.99), a mask that covers
exactly the projected rectangle, and a depth raster equal to Z(t) inside the
mask (or 1/Z(t) in inverse_relative mode) with a constant background beyond
the vehicle's range. All randomness is driven by substreams keyed on
(seed, sample index, frame index) so any frame reproduces independently of
execution order.

Sampled scenario parameters are quantized to a dyadic grid (2^-12 m for
distances, the matching per-frame step for speed) so that every noiseless
metric depth value is exactly representable in the float32 raster payload;
the extracted dist_diff then satisfies speed = 3.6 * dist_diff / t to
floating-point precision end to end through the on-disk formats.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, InfeasibleRangesError, ValidationError
from .features import bbox_pixel_bounds
from .interchange import (
    DatasetManifest,
    DatasetMetadata,
    Detection,
    DepthRaster,
    FrameObservation,
    MaskRaster,
    Sample,
    write_depth_raster,
    write_manifest,
    write_mask_raster,
)

KMH_TO_MPS = 1.0 / 3.6
DETECTION_CONFIDENCE = 0.99

# Distances and per-frame depth steps snap to this grid so metric depth
# values stay exact in float32 (values < 4096 m with 2^-12 m resolution).
DEPTH_GRID = 2.0**-12

MAX_SAMPLE_RETRIES = 100


@dataclass(frozen=True)
class NoiseParams:
    bbox_sigma_px: float = 0.0
    depth_sigma: float = 0.0


@dataclass(frozen=True)
class ScenarioParams:
    focal_px: float = 200.0
    vehicle_width_m: float = 1.8
    vehicle_height_m: float = 1.5
    initial_distance_m: float = 120.0
    speed_kmh: float = 36.0
    fps: float = 10.0
    duration_s: float = 4.0
    image_size: tuple[int, int] = (64, 48)
    depth_mode: str = "metric"  # "metric" | "inverse_relative"
    noise: NoiseParams = field(default_factory=NoiseParams)
    rng_seed: int = 0


@dataclass
class RenderedFrame:
    observation: FrameObservation
    depth: DepthRaster
    mask: MaskRaster


def validate_scenario(params: ScenarioParams) -> None:
    """Reject scenes where the vehicle reaches the camera or overflows the frame."""
    for name in ("focal_px", "vehicle_width_m", "vehicle_height_m", "initial_distance_m",
                 "fps", "duration_s"):
        if getattr(params, name) <= 0:
            raise ValidationError(f"{name} must be > 0")
    if params.speed_kmh < 0:
        raise ValidationError("speed_kmh must be >= 0")
    if params.depth_mode not in ("metric", "inverse_relative"):
        raise ValidationError(f"depth_mode {params.depth_mode!r} unknown")
    if params.rng_seed < 0:
        raise ValidationError("rng_seed must be >= 0")
    img_w, img_h = params.image_size
    if img_w < 1 or img_h < 1:
        raise ValidationError("image_size must be >= 1x1")
    final_z = params.initial_distance_m - params.speed_kmh * KMH_TO_MPS * params.duration_s
    if final_z <= 0:
        raise GeometryError(
            f"vehicle passes the camera: final distance {final_z:.3f} m <= 0"
        )
    bw = params.focal_px * params.vehicle_width_m / final_z
    bh = params.focal_px * params.vehicle_height_m / final_z
    if bw > img_w or bh > img_h:
        raise GeometryError(
            f"projected bbox {bw:.1f}x{bh:.1f} px exceeds image {img_w}x{img_h} "
            f"at final distance {final_z:.2f} m"
        )


def distance_at(params: ScenarioParams, time_s: float) -> float:
    return params.initial_distance_m - params.speed_kmh * KMH_TO_MPS * time_s


def project_vehicle(
    params: ScenarioParams, time_s: float
) -> tuple[tuple[float, float, float, float], float]:
    """Noiseless bbox (x1, y1, x2, y2) and camera distance at `time_s`."""
    z = distance_at(params, time_s)
    if z <= 0:
        raise GeometryError(f"distance {z:.3f} m <= 0 at t={time_s:.3f} s")
    img_w, img_h = params.image_size
    bw = params.focal_px * params.vehicle_width_m / z
    bh = params.focal_px * params.vehicle_height_m / z
    x1 = img_w / 2.0 - bw / 2.0
    x2 = img_w / 2.0 + bw / 2.0
    y2 = float(img_h)
    y1 = img_h - bh
    return (x1, y1, x2, y2), z


def frame_count(params: ScenarioParams) -> int:
    return int(math.floor(params.duration_s * params.fps)) + 1


def background_depth(params: ScenarioParams) -> float:
    """Constant background: beyond the vehicle in metric mode, below it in inverse."""
    if params.depth_mode == "metric":
        return 2.0 * params.initial_distance_m
    return 1.0 / (2.0 * params.initial_distance_m)


def render_frame(
    params: ScenarioParams, time_s: float, sample_index: int = 0
) -> RenderedFrame:
    """Detection, depth raster, and mask for the frame nearest `time_s`.

    With zero noise sigmas the depth inside the mask is exactly Z(t) (metric)
    or 1/Z(t) (inverse_relative), and the detection bbox equals the projection,
    so mask-mode and bbox-mode depth aggregation agree exactly.
    """
    if time_s < 0 or time_s > params.duration_s:
        raise ValidationError(f"time {time_s} outside [0, {params.duration_s}]")
    bbox, z = project_vehicle(params, time_s)
    img_w, img_h = params.image_size
    frame_index = int(round(time_s * params.fps))

    x0, x1, y0, y1 = bbox_pixel_bounds(bbox, img_w, img_h)
    mask_values = np.zeros((img_h, img_w), dtype=np.uint8)
    mask_values[y0:y1, x0:x1] = 1

    vehicle_depth = z if params.depth_mode == "metric" else 1.0 / z
    depth_values = np.full((img_h, img_w), background_depth(params), dtype=np.float32)
    depth_values[y0:y1, x0:x1] = np.float32(vehicle_depth)

    det_bbox = bbox
    noise = params.noise
    if noise.bbox_sigma_px > 0 or noise.depth_sigma > 0:
        rng = np.random.default_rng(
            np.random.SeedSequence((params.rng_seed, sample_index, frame_index))
        )
        if noise.bbox_sigma_px > 0:
            dx1, dy1, dx2, dy2 = rng.normal(0.0, noise.bbox_sigma_px, 4)
            nx1, nx2 = sorted((bbox[0] + dx1, bbox[2] + dx2))
            ny1, ny2 = sorted((bbox[1] + dy1, bbox[3] + dy2))
            det_bbox = (nx1, ny1, nx2, ny2)
        if noise.depth_sigma > 0:
            jitter = rng.normal(0.0, noise.depth_sigma, (img_h, img_w))
            depth_values = (depth_values.astype(np.float64) + jitter).astype(np.float32)

    observation = FrameObservation(
        frame_index=frame_index,
        detections=[Detection("car", DETECTION_CONFIDENCE, det_bbox)],
    )
    convention = "larger_is_farther" if params.depth_mode == "metric" else "larger_is_nearer"
    return RenderedFrame(
        observation=observation,
        depth=DepthRaster(img_w, img_h, depth_values, depth_convention=convention),
        mask=MaskRaster(img_w, img_h, mask_values),
    )


def render_scene(params: ScenarioParams, sample_index: int = 0) -> list[RenderedFrame]:
    """Every frame of the scene at the scenario's fps grid."""
    validate_scenario(params)
    return [
        render_frame(params, k / params.fps, sample_index)
        for k in range(frame_count(params))
    ]


# --- dataset generation -------------------------------------------------------


@dataclass(frozen=True)
class ScenarioRanges:
    """Sampling ranges plus the fixed camera/vehicle geometry for a dataset."""

    speed_kmh: tuple[float, float] = (5.0, 60.0)
    duration_s: tuple[float, float] = (2.0, 6.0)
    initial_distance_m: tuple[float, float] = (110.0, 170.0)
    focal_px: float = 200.0
    vehicle_width_m: float = 1.8
    vehicle_height_m: float = 1.5
    fps: float = 10.0
    image_size: tuple[int, int] = (64, 48)
    depth_mode: str = "metric"
    noise: NoiseParams = field(default_factory=NoiseParams)


def _check_range(name: str, lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValidationError(f"{name} range ({lo}, {hi}) invalid")


def _snap_to_grid(value: float, grid: float) -> float:
    return round(value / grid) * grid


def sample_scenario(ranges: ScenarioRanges, seed: int, sample_index: int) -> ScenarioParams:
    """Draw one scenario uniformly within ranges, resampling invariant violations.

    Speed is quantized so the per-frame depth step lands on the dyadic grid,
    and the initial distance snaps to the same grid; both shifts are below
    0.01 km/h and 0.25 mm, keeping the draw effectively uniform while making
    every noiseless metric depth value float32-exact.
    """
    _check_range("speed_kmh", *ranges.speed_kmh)
    _check_range("duration_s", *ranges.duration_s)
    _check_range("initial_distance_m", *ranges.initial_distance_m)
    rng = np.random.default_rng(np.random.SeedSequence((seed, sample_index)))
    last_error: Exception | None = None
    for _ in range(MAX_SAMPLE_RETRIES):
        speed = rng.uniform(*ranges.speed_kmh)
        duration = rng.uniform(*ranges.duration_s)
        z0 = rng.uniform(*ranges.initial_distance_m)
        step = _snap_to_grid(speed * KMH_TO_MPS / ranges.fps, DEPTH_GRID)
        speed = step * ranges.fps * 3.6
        z0 = _snap_to_grid(z0, DEPTH_GRID)
        params = ScenarioParams(
            focal_px=ranges.focal_px,
            vehicle_width_m=ranges.vehicle_width_m,
            vehicle_height_m=ranges.vehicle_height_m,
            initial_distance_m=z0,
            speed_kmh=speed,
            fps=ranges.fps,
            duration_s=duration,
            image_size=ranges.image_size,
            depth_mode=ranges.depth_mode,
            noise=ranges.noise,
            rng_seed=seed,
        )
        try:
            validate_scenario(params)
        except (GeometryError, ValidationError) as exc:
            last_error = exc
            continue
        return params
    raise InfeasibleRangesError(
        f"no valid scenario within {MAX_SAMPLE_RETRIES} draws for sample "
        f"{sample_index} (last: {last_error})"
    )


def generate_dataset(
    n: int, ranges: ScenarioRanges, seed: int, out_dir: str | Path
) -> Path:
    """Write an n-sample synthetic dataset tree and return the manifest path.

    Layout: <out_dir>/manifest.json, <out_dir>/scenario.json (the ranges and
    seed, for reproducibility), and per-sample rasters under
    <out_dir>/rasters/<sample_id>/. Same seed, same ranges -> byte-identical
    tree.
    """
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    samples: list[Sample] = []
    for i in range(n):
        params = sample_scenario(ranges, seed, i)
        sample_id = f"sample_{i:04d}"
        raster_dir = out_dir / "rasters" / sample_id
        raster_dir.mkdir(parents=True, exist_ok=True)
        frames: list[FrameObservation] = []
        for rendered in render_scene(params, sample_index=i):
            idx = rendered.observation.frame_index
            depth_path = raster_dir / f"depth_{idx:06d}.dpth"
            mask_path = raster_dir / f"mask_{idx:06d}.mask"
            write_depth_raster(rendered.depth, depth_path)
            write_mask_raster(rendered.mask, mask_path)
            rendered.observation.depth_path = depth_path.resolve()
            rendered.observation.mask_path = mask_path.resolve()
            frames.append(rendered.observation)
        samples.append(
            Sample(
                sample_id=sample_id,
                fps=ranges.fps,
                frames=frames,
                ground_truth_speed_kmh=params.speed_kmh,
                perspective="front",
            )
        )

    metadata = DatasetMetadata(
        depth_units="metric_m" if ranges.depth_mode == "metric" else "relative",
        depth_convention=(
            "larger_is_farther" if ranges.depth_mode == "metric" else "larger_is_nearer"
        ),
    )
    manifest_path = out_dir / "manifest.json"
    write_manifest(DatasetManifest(metadata=metadata, samples=samples), manifest_path)

    scenario_doc = {"n": n, "seed": seed, "ranges": asdict(ranges)}
    (out_dir / "scenario.json").write_text(json.dumps(scenario_doc, indent=2) + "\n")
    return manifest_path
