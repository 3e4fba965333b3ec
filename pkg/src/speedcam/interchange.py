"""On-disk interchange formats decoupling the pipeline from any detector/depth model.

Three artifacts live on disk:

* depth rasters   -- ``DPTH`` magic, version byte 0x01, u32 LE width, u32 LE
                     height, then width*height IEEE-754 float32 LE, row-major,
                     top-left origin;
* mask rasters    -- ``MASK`` magic, same header, payload u8 in {0, 1};
* the manifest    -- one JSON document per dataset describing every sample's
                     frames, detections and raster paths, plus a metadata
                     block naming the depth units and convention.

Readers are pure functions of file content and never silently repair data:
every invariant violation is reported with the offending sample_id or
frame_index. Raster paths inside a manifest are relative to the manifest's
directory; `read_manifest` resolves them and checks existence but does not
parse raster payloads.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    IoError,
    MaskValueError,
    MissingFileError,
    NonFiniteValueError,
    ParseError,
    TruncatedFileError,
    ValidationError,
)

DEPTH_MAGIC = b"DPTH"
MASK_MAGIC = b"MASK"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sBII")  # magic, version, width, height

DEPTH_UNITS = ("relative", "metric_m")
DEPTH_CONVENTIONS = ("larger_is_nearer", "larger_is_farther")
PERSPECTIVES = ("front", "side", "unknown")


@dataclass(frozen=True)
class Detection:
    """One detector output: class label, confidence and pixel bbox (x1, y1, x2, y2)."""

    class_label: str
    confidence: float
    bbox: tuple[float, float, float, float]


@dataclass
class DepthRaster:
    """Per-pixel depth estimates; `values` is a float32 (height, width) array."""

    width: int
    height: int
    values: np.ndarray
    depth_convention: str = "larger_is_nearer"


@dataclass
class MaskRaster:
    """Binary vehicle mask; `values` is a uint8 (height, width) array of {0, 1}."""

    width: int
    height: int
    values: np.ndarray


@dataclass
class FrameObservation:
    """One frame's detections plus optional depth/mask raster references."""

    frame_index: int
    detections: list[Detection] = field(default_factory=list)
    depth_path: Path | None = None
    mask_path: Path | None = None


@dataclass
class Sample:
    """One single-vehicle video reduced to its per-frame observations."""

    sample_id: str
    fps: float
    frames: list[FrameObservation]
    ground_truth_speed_kmh: float | None = None
    perspective: str = "unknown"


@dataclass
class DatasetMetadata:
    depth_units: str = "relative"
    depth_convention: str = "larger_is_nearer"


@dataclass
class DatasetManifest:
    metadata: DatasetMetadata
    samples: list[Sample]


# --- rasters ---------------------------------------------------------------


def _read_raster_header(data: bytes, magic: bytes, path: Path) -> tuple[int, int]:
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    got_magic, version, width, height = _HEADER.unpack_from(data)
    if got_magic != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, found {got_magic!r}")
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported format version {version}")
    if width < 1 or height < 1:
        raise ParseError(f"{path}: dimensions must be >= 1, got {width}x{height}")
    return width, height


def _read_payload(data: bytes, offset: int, nbytes: int, path: Path) -> bytes:
    payload = data[offset:]
    if len(payload) < nbytes:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload)} bytes, header promises {nbytes}"
        )
    if len(payload) > nbytes:
        raise ParseError(f"{path}: {len(payload) - nbytes} trailing bytes after payload")
    return payload


def read_depth_raster(path: str | Path) -> DepthRaster:
    """Decode a depth raster file; NaN/Inf payload values are rejected."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingFileError(f"depth raster not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    width, height = _read_raster_header(data, DEPTH_MAGIC, path)
    payload = _read_payload(data, _HEADER.size, width * height * 4, path)
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width).copy()
    if not np.isfinite(values).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    return DepthRaster(width=width, height=height, values=values)


def write_depth_raster(raster: DepthRaster, path: str | Path) -> None:
    """Write a depth raster; `read_depth_raster` reproduces it bit-exactly."""
    values = np.asarray(raster.values, dtype="<f4")
    if values.shape != (raster.height, raster.width):
        raise ValidationError(
            f"raster values shape {values.shape} != ({raster.height}, {raster.width})"
        )
    if raster.width < 1 or raster.height < 1:
        raise ValidationError("raster dimensions must be >= 1")
    if not np.isfinite(values).all():
        raise NonFiniteValueError("raster contains NaN or Inf; refusing to write")
    header = _HEADER.pack(DEPTH_MAGIC, FORMAT_VERSION, raster.width, raster.height)
    try:
        Path(path).write_bytes(header + values.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_mask_raster(path: str | Path) -> MaskRaster:
    """Decode a mask raster file; payload bytes outside {0, 1} are rejected."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingFileError(f"mask raster not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    width, height = _read_raster_header(data, MASK_MAGIC, path)
    payload = _read_payload(data, _HEADER.size, width * height, path)
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    bad = values > 1
    if bad.any():
        offender = int(values[bad][0])
        raise MaskValueError(f"{path}: mask payload byte {offender} outside {{0, 1}}")
    return MaskRaster(width=width, height=height, values=values)


def write_mask_raster(mask: MaskRaster, path: str | Path) -> None:
    """Write a mask raster; `read_mask_raster` reproduces it bit-exactly."""
    values = np.asarray(mask.values, dtype=np.uint8)
    if values.shape != (mask.height, mask.width):
        raise ValidationError(
            f"mask values shape {values.shape} != ({mask.height}, {mask.width})"
        )
    if mask.width < 1 or mask.height < 1:
        raise ValidationError("mask dimensions must be >= 1")
    if (values > 1).any():
        raise MaskValueError("mask values outside {0, 1}; refusing to write")
    header = _HEADER.pack(MASK_MAGIC, FORMAT_VERSION, mask.width, mask.height)
    try:
        Path(path).write_bytes(header + values.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --- manifest ----------------------------------------------------------------


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValidationError(f"{context}: missing field {key!r}")
    return mapping[key]


def _finite_number(value, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{context}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{context}: value must be finite, got {value!r}")
    return float(value)


def _parse_detection(obj: dict, context: str) -> Detection:
    if not isinstance(obj, dict):
        raise ValidationError(f"{context}: detection must be an object")
    label = _require(obj, "class_label", context)
    if not isinstance(label, str) or not label:
        raise ValidationError(f"{context}: class_label must be a nonempty string")
    conf = _finite_number(_require(obj, "confidence", context), f"{context}.confidence")
    if not 0.0 <= conf <= 1.0:
        raise ValidationError(f"{context}: confidence {conf} outside [0, 1]")
    bbox_raw = _require(obj, "bbox", context)
    if not isinstance(bbox_raw, (list, tuple)) or len(bbox_raw) != 4:
        raise ValidationError(f"{context}: bbox must hold 4 coordinates")
    x1, y1, x2, y2 = (_finite_number(v, f"{context}.bbox") for v in bbox_raw)
    if x1 > x2 or y1 > y2:
        raise ValidationError(f"{context}: bbox corners out of order ({x1},{y1},{x2},{y2})")
    return Detection(class_label=label, confidence=conf, bbox=(x1, y1, x2, y2))


def _parse_frame(obj: dict, base_dir: Path, context: str) -> FrameObservation:
    if not isinstance(obj, dict):
        raise ValidationError(f"{context}: frame must be an object")
    idx = _require(obj, "frame_index", context)
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise ValidationError(f"{context}: frame_index must be a nonnegative integer")
    detections_raw = _require(obj, "detections", context)
    if not isinstance(detections_raw, list):
        raise ValidationError(f"{context}: detections must be a list")
    detections = [
        _parse_detection(d, f"{context}.detections[{i}]") for i, d in enumerate(detections_raw)
    ]
    frame = FrameObservation(frame_index=idx, detections=detections)
    for attr in ("depth_path", "mask_path"):
        ref = obj.get(attr)
        if ref is None:
            continue
        if not isinstance(ref, str):
            raise ValidationError(f"{context}: {attr} must be a string path or null")
        resolved = (base_dir / ref).resolve()
        if not resolved.is_file():
            raise MissingFileError(f"{context}: {attr} {ref!r} does not exist")
        setattr(frame, attr, resolved)
    return frame


def _parse_sample(obj: dict, base_dir: Path) -> Sample:
    if not isinstance(obj, dict):
        raise ValidationError("sample entries must be objects")
    sample_id = _require(obj, "sample_id", "sample")
    if not isinstance(sample_id, str) or not sample_id:
        raise ValidationError("sample: sample_id must be a nonempty string")
    ctx = f"sample {sample_id!r}"
    fps = _finite_number(_require(obj, "fps", ctx), f"{ctx}.fps")
    if fps <= 0:
        raise ValidationError(f"{ctx}: fps must be > 0, got {fps}")
    frames_raw = _require(obj, "frames", ctx)
    if not isinstance(frames_raw, list) or len(frames_raw) < 2:
        raise ValidationError(f"{ctx}: needs at least 2 frames")
    frames = [
        _parse_frame(f, base_dir, f"{ctx}.frames[{i}]") for i, f in enumerate(frames_raw)
    ]
    seen: set[int] = set()
    for frame in frames:
        if frame.frame_index in seen:
            raise ValidationError(f"{ctx}: duplicate frame_index {frame.frame_index}")
        seen.add(frame.frame_index)
    speed = obj.get("ground_truth_speed_kmh")
    if speed is not None:
        speed = _finite_number(speed, f"{ctx}.ground_truth_speed_kmh")
        if speed < 0:
            raise ValidationError(f"{ctx}: ground_truth_speed_kmh must be >= 0")
    perspective = obj.get("perspective", "unknown")
    if perspective not in PERSPECTIVES:
        raise ValidationError(f"{ctx}: perspective {perspective!r} not in {PERSPECTIVES}")
    return Sample(
        sample_id=sample_id,
        fps=fps,
        frames=frames,
        ground_truth_speed_kmh=speed,
        perspective=perspective,
    )


def read_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Raster references are resolved against the manifest's directory and
    stat-checked but not parsed.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise MissingFileError(f"manifest not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top-level document must be an object")

    meta_raw = doc.get("metadata", {})
    if not isinstance(meta_raw, dict):
        raise ValidationError("metadata: must be an object")
    units = meta_raw.get("depth_units", "relative")
    if units not in DEPTH_UNITS:
        raise ValidationError(f"metadata: depth_units {units!r} not in {DEPTH_UNITS}")
    convention = meta_raw.get("depth_convention", "larger_is_nearer")
    if convention not in DEPTH_CONVENTIONS:
        raise ValidationError(
            f"metadata: depth_convention {convention!r} not in {DEPTH_CONVENTIONS}"
        )

    samples_raw = _require(doc, "samples", str(path))
    if not isinstance(samples_raw, list):
        raise ValidationError("samples: must be a list")
    base_dir = path.resolve().parent
    samples = [_parse_sample(s, base_dir) for s in samples_raw]
    seen_ids: set[str] = set()
    for sample in samples:
        if sample.sample_id in seen_ids:
            raise ValidationError(f"duplicate sample_id {sample.sample_id!r}")
        seen_ids.add(sample.sample_id)
    return DatasetManifest(
        metadata=DatasetMetadata(depth_units=units, depth_convention=convention),
        samples=samples,
    )


def _relative_ref(target: Path | None, base_dir: Path) -> str | None:
    if target is None:
        return None
    try:
        return Path(target).resolve().relative_to(base_dir).as_posix()
    except ValueError:
        # Falls outside the manifest directory; keep a portable relative ref.
        import os

        return Path(os.path.relpath(Path(target).resolve(), base_dir)).as_posix()


def manifest_to_dict(manifest: DatasetManifest, base_dir: Path) -> dict:
    """Canonical JSON-ready form; raster paths made relative to `base_dir`."""
    return {
        "metadata": {
            "depth_units": manifest.metadata.depth_units,
            "depth_convention": manifest.metadata.depth_convention,
        },
        "samples": [
            {
                "sample_id": s.sample_id,
                "fps": s.fps,
                "ground_truth_speed_kmh": s.ground_truth_speed_kmh,
                "perspective": s.perspective,
                "frames": [
                    {
                        "frame_index": f.frame_index,
                        "detections": [
                            {
                                "class_label": d.class_label,
                                "confidence": d.confidence,
                                "bbox": list(d.bbox),
                            }
                            for d in f.detections
                        ],
                        "depth_path": _relative_ref(f.depth_path, base_dir),
                        "mask_path": _relative_ref(f.mask_path, base_dir),
                    }
                    for f in s.frames
                ],
            }
            for s in manifest.samples
        ],
    }


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as canonical JSON (deterministic byte output)."""
    path = Path(path)
    doc = manifest_to_dict(manifest, path.resolve().parent)
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
