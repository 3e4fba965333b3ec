"""Synthetic scene tests: pinhole projection, rendering, dataset generation."""

from __future__ import annotations

import numpy as np
import pytest

from speedcam.errors import GeometryError, InfeasibleRangesError, ValidationError
from speedcam.features import ExtractionConfig, bbox_area, extract_dataset, region_mean_depth
from speedcam.interchange import Detection, read_manifest
from speedcam.synth import (
    NoiseParams,
    ScenarioParams,
    ScenarioRanges,
    frame_count,
    generate_dataset,
    project_vehicle,
    render_frame,
    render_scene,
    sample_scenario,
    validate_scenario,
)
from tests.helpers import tree_digest


class TestProjectVehicle:
    def test_stationary_bbox_constant(self):
        params = ScenarioParams(speed_kmh=0.0, initial_distance_m=50.0, duration_s=3.0)
        boxes = {project_vehicle(params, t)[0] for t in (0.0, 1.5, 3.0)}
        assert len(boxes) == 1

    def test_pinhole_formula(self):
        params = ScenarioParams(
            focal_px=1000.0,
            vehicle_width_m=1.8,
            vehicle_height_m=1.5,
            initial_distance_m=10.0,
            speed_kmh=0.0,
            image_size=(640, 480),
            duration_s=1.0,
        )
        bbox, z = project_vehicle(params, 0.0)
        assert z == 10.0
        x1, y1, x2, y2 = bbox
        assert (x2 - x1, y2 - y1) == (180.0, 150.0)
        assert bbox_area(Detection("car", 0.99, bbox)) == 27000.0
        assert (x1 + x2) / 2 == 320.0  # horizontally centered
        assert y2 == 480.0  # bottom anchored

    def test_inverse_square_law(self):
        params = ScenarioParams(
            focal_px=400.0,
            initial_distance_m=20.0,
            speed_kmh=36.0,  # 10 m/s: Z halves after 1 s
            duration_s=1.0,
            image_size=(640, 480),
        )
        area_far = bbox_area(Detection("car", 0.99, project_vehicle(params, 0.0)[0]))
        area_near = bbox_area(Detection("car", 0.99, project_vehicle(params, 1.0)[0]))
        assert area_near == pytest.approx(4.0 * area_far, rel=1e-12)

    def test_distance_zero_is_geometry_error(self):
        params = ScenarioParams(initial_distance_m=5.0, speed_kmh=36.0, duration_s=10.0)
        with pytest.raises(GeometryError):
            project_vehicle(params, 0.5001 * 10)


class TestValidateScenario:
    def test_vehicle_passing_camera(self):
        with pytest.raises(GeometryError):
            validate_scenario(
                ScenarioParams(initial_distance_m=10.0, speed_kmh=36.0, duration_s=2.0)
            )

    def test_bbox_overflow(self):
        with pytest.raises(GeometryError):
            validate_scenario(
                ScenarioParams(
                    focal_px=2000.0,
                    initial_distance_m=30.0,
                    speed_kmh=18.0,
                    duration_s=2.0,
                    image_size=(64, 48),
                )
            )

    def test_negative_seed(self):
        with pytest.raises(ValidationError):
            validate_scenario(ScenarioParams(rng_seed=-1))


class TestRenderFrame:
    def test_noiseless_metric_mask_mean_is_distance(self):
        params = ScenarioParams(
            initial_distance_m=120.0, speed_kmh=54.0, duration_s=4.0
        )
        for t in (0.0, 2.0, 4.0):
            rendered = render_frame(params, t)
            z = 120.0 - 15.0 * t
            assert region_mean_depth(rendered.depth, rendered.mask, "mask") == z
            # bbox-mode over the detection box agrees exactly
            bbox = rendered.observation.detections[0].bbox
            assert region_mean_depth(rendered.depth, bbox, "bbox") == z

    def test_inverse_relative_mode(self):
        params = ScenarioParams(
            initial_distance_m=4.0,
            speed_kmh=0.0,
            duration_s=1.0,
            depth_mode="inverse_relative",
            focal_px=40.0,
        )
        rendered = render_frame(params, 0.0)
        assert region_mean_depth(rendered.depth, rendered.mask, "mask") == 0.25
        assert rendered.depth.depth_convention == "larger_is_nearer"

    def test_background_beyond_vehicle_range(self):
        params = ScenarioParams(initial_distance_m=100.0, speed_kmh=36.0, duration_s=4.0)
        rendered = render_frame(params, 4.0)
        background = rendered.depth.values[rendered.mask.values == 0]
        vehicle = rendered.depth.values[rendered.mask.values == 1]
        assert background.min() > vehicle.max()

    def test_same_seed_same_frame_bit_identical(self):
        params = ScenarioParams(
            initial_distance_m=100.0,
            speed_kmh=36.0,
            duration_s=2.0,
            noise=NoiseParams(bbox_sigma_px=1.5, depth_sigma=0.2),
            rng_seed=77,
        )
        a = render_frame(params, 1.0, sample_index=3)
        b = render_frame(params, 1.0, sample_index=3)
        assert np.array_equal(a.depth.values, b.depth.values)
        assert a.observation.detections[0].bbox == b.observation.detections[0].bbox
        # a different frame draws a different substream
        c = render_frame(params, 1.1, sample_index=3)
        assert not np.array_equal(a.depth.values, c.depth.values)

    def test_noisy_bbox_stays_ordered(self):
        params = ScenarioParams(
            initial_distance_m=100.0,
            speed_kmh=36.0,
            duration_s=2.0,
            noise=NoiseParams(bbox_sigma_px=25.0),
            rng_seed=5,
        )
        for k in range(frame_count(params)):
            bbox = render_frame(params, k / params.fps).observation.detections[0].bbox
            assert bbox[0] <= bbox[2] and bbox[1] <= bbox[3]

    def test_monotone_area_and_depth(self):
        params = ScenarioParams(initial_distance_m=90.0, speed_kmh=45.0, duration_s=5.0)
        frames = render_scene(params)
        areas = [bbox_area(f.observation.detections[0]) for f in frames]
        depths = [region_mean_depth(f.depth, f.mask, "mask") for f in frames]
        assert all(a2 > a1 for a1, a2 in zip(areas, areas[1:]))
        assert all(d2 < d1 for d1, d2 in zip(depths, depths[1:]))


class TestGenerateDataset:
    def test_known_speed_identity(self, tmp_path):
        # 36 km/h = 10 m/s over 1 s from 20 m: dist_diff 10 m, t 1 s
        ranges = ScenarioRanges(
            speed_kmh=(36.0, 36.0),
            duration_s=(1.0, 1.0),
            initial_distance_m=(20.0, 20.0),
        )
        manifest_path = generate_dataset(1, ranges, seed=0, out_dir=tmp_path / "d")
        manifest = read_manifest(manifest_path)
        records, skipped = extract_dataset(manifest, ExtractionConfig())
        assert not skipped
        (r,) = records
        assert r.t == 1.0
        assert r.dist_diff == 10.0
        assert r.speed_kmh == 36.0

    def test_empty_dataset(self, tmp_path):
        manifest_path = generate_dataset(0, ScenarioRanges(), seed=0, out_dir=tmp_path / "d")
        manifest = read_manifest(manifest_path)
        assert manifest.samples == []
        assert not (tmp_path / "d" / "rasters").exists()

    def test_same_seed_byte_identical_trees(self, tmp_path):
        ranges = ScenarioRanges(duration_s=(1.0, 2.0))
        generate_dataset(3, ranges, seed=123, out_dir=tmp_path / "a")
        generate_dataset(3, ranges, seed=123, out_dir=tmp_path / "b")
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
        generate_dataset(3, ranges, seed=124, out_dir=tmp_path / "c")
        assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "c")

    def test_manifest_metadata(self, tmp_path):
        ranges = ScenarioRanges(duration_s=(1.0, 1.0), depth_mode="inverse_relative")
        manifest = read_manifest(generate_dataset(1, ranges, 0, tmp_path / "d"))
        assert manifest.metadata.depth_units == "relative"
        assert manifest.metadata.depth_convention == "larger_is_nearer"
        assert manifest.samples[0].perspective == "front"

    def test_scenario_spec_written(self, tmp_path):
        generate_dataset(1, ScenarioRanges(duration_s=(1.0, 1.0)), 9, tmp_path / "d")
        spec = (tmp_path / "d" / "scenario.json").read_text()
        assert '"seed": 9' in spec

    def test_infeasible_ranges(self, tmp_path):
        ranges = ScenarioRanges(
            speed_kmh=(60.0, 60.0),
            duration_s=(6.0, 6.0),
            initial_distance_m=(5.0, 5.0),
        )
        with pytest.raises(InfeasibleRangesError):
            generate_dataset(1, ranges, seed=0, out_dir=tmp_path / "d")

    def test_resampling_recovers_partial_feasibility(self):
        # wide distance range: some draws pass the camera, resampling fixes them
        ranges = ScenarioRanges(
            speed_kmh=(50.0, 60.0),
            duration_s=(5.0, 6.0),
            initial_distance_m=(60.0, 170.0),
        )
        for i in range(10):
            params = sample_scenario(ranges, seed=4, sample_index=i)
            validate_scenario(params)

    def test_speed_quantization_is_fine(self):
        ranges = ScenarioRanges(speed_kmh=(5.0, 60.0))
        for i in range(20):
            params = sample_scenario(ranges, seed=2, sample_index=i)
            # snapped speed stays within ~0.01 km/h of the requested range
            assert 4.99 <= params.speed_kmh <= 60.01
