"""Shared builders for on-disk samples, manifests and rasters, plus the
acceptance-criteria result list the conftest hook prints after a run."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

ACCEPTANCE_RESULTS: list[str] = []


from speedcam.interchange import (
    DatasetManifest,
    DatasetMetadata,
    Detection,
    DepthRaster,
    FrameObservation,
    MaskRaster,
    Sample,
    write_depth_raster,
    write_mask_raster,
)


def write_frame_rasters(
    directory: Path,
    frame_index: int,
    depth: np.ndarray | None,
    mask: np.ndarray | None,
) -> tuple[Path | None, Path | None]:
    """Write optional depth/mask arrays for one frame, returning their paths."""
    depth_path = mask_path = None
    if depth is not None:
        depth = np.asarray(depth, dtype=np.float32)
        depth_path = (directory / f"depth_{frame_index:06d}.dpth").resolve()
        write_depth_raster(
            DepthRaster(depth.shape[1], depth.shape[0], depth), depth_path
        )
    if mask is not None:
        mask = np.asarray(mask, dtype=np.uint8)
        mask_path = (directory / f"mask_{frame_index:06d}.mask").resolve()
        write_mask_raster(MaskRaster(mask.shape[1], mask.shape[0], mask), mask_path)
    return depth_path, mask_path


def build_frames(
    directory: Path,
    frame_specs: list[tuple[int, list[Detection], np.ndarray | None, np.ndarray | None]],
) -> list[FrameObservation]:
    """Materialize (frame_index, detections, depth, mask) specs on disk."""
    directory.mkdir(parents=True, exist_ok=True)
    frames = []
    for frame_index, detections, depth, mask in frame_specs:
        depth_path, mask_path = write_frame_rasters(directory, frame_index, depth, mask)
        frames.append(
            FrameObservation(
                frame_index=frame_index,
                detections=detections,
                depth_path=depth_path,
                mask_path=mask_path,
            )
        )
    return frames


def random_manifest(tmp_dir: Path, rng: np.random.Generator, n_samples: int) -> DatasetManifest:
    """A random but valid manifest with tiny raster files on disk."""
    samples = []
    for i in range(n_samples):
        sample_dir = tmp_dir / f"rasters/s{i:03d}"
        sample_dir.mkdir(parents=True, exist_ok=True)
        n_frames = int(rng.integers(2, 5))
        frames = []
        for k in range(n_frames):
            w, h = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            depth = rng.uniform(0.1, 50.0, (h, w)).astype(np.float32)
            mask = (rng.random((h, w)) < 0.5).astype(np.uint8)
            depth_path, mask_path = write_frame_rasters(sample_dir, k, depth, mask)
            n_dets = int(rng.integers(0, 3))
            detections = []
            for _ in range(n_dets):
                x1, y1 = rng.uniform(0, 30, 2)
                bw, bh = rng.uniform(0, 20, 2)
                detections.append(
                    Detection(
                        class_label=str(rng.choice(["car", "truck", "person"])),
                        confidence=float(rng.uniform(0, 1)),
                        bbox=(float(x1), float(y1), float(x1 + bw), float(y1 + bh)),
                    )
                )
            frames.append(
                FrameObservation(
                    frame_index=k,
                    detections=detections,
                    depth_path=depth_path,
                    mask_path=mask_path,
                )
            )
        speed = float(rng.uniform(0, 80)) if rng.random() < 0.7 else None
        samples.append(
            Sample(
                sample_id=f"s{i:03d}",
                fps=float(rng.uniform(5, 60)),
                frames=frames,
                ground_truth_speed_kmh=speed,
                perspective=str(rng.choice(["front", "side", "unknown"])),
            )
        )
    metadata = DatasetMetadata(
        depth_units=str(rng.choice(["relative", "metric_m"])),
        depth_convention=str(rng.choice(["larger_is_nearer", "larger_is_farther"])),
    )
    return DatasetManifest(metadata=metadata, samples=samples)


def tree_digest(root: Path) -> dict[str, str]:
    """Relative path -> sha256, for byte-identity comparisons of dataset trees."""
    digest = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest[path.relative_to(root).as_posix()] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return digest
