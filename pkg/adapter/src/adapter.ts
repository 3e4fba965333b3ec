/**
 * Video-to-dataset pipeline: decode each listed video, run the configured
 * detector/segmenter/depth backends over sampled frames, and write one
 * interchange dataset (rasters + manifest) the core package can consume
 * unchanged. Confidences are exported raw; the 0.7 filter lives downstream.
 */

import { mkdirSync, readFileSync } from 'fs';
import { basename, dirname, join, resolve } from 'path';

import {
  DatasetManifest,
  FrameObservation,
  ManifestSample,
  writeDepthRaster,
  writeManifest,
  writeMaskRaster,
} from './interchange.js';
import {
  createDepthEstimator,
  createDetector,
  createSegmenter,
  resampleMaskNearest,
} from './models.js';
import { decodeY4m } from './video.js';

export interface GroundTruthRow {
  videoPath: string;
  speedKmh: number | null;
  perspective: 'front' | 'side' | 'unknown';
}

export interface AdapterConfig {
  /** CSV with header video_path,speed_kmh,perspective */
  videosTable: string;
  outDir: string;
  frameStride: number;
  detector: string;
  segmenter: string;
  depthEstimator: string;
}

export interface ProcessSummary {
  manifestPath: string;
  samples: number;
  framesProcessed: number;
  framesWithoutDetections: number;
}

export function readGroundTruthTable(path: string): GroundTruthRow[] {
  const lines = readFileSync(path, 'utf8').split('\n').filter((l) => l.trim() !== '');
  if (lines.length === 0) throw new Error(`${path}: empty ground-truth table`);
  const header = lines[0].trim();
  if (header !== 'video_path,speed_kmh,perspective') {
    throw new Error(`${path}: expected header video_path,speed_kmh,perspective`);
  }
  const baseDir = dirname(resolve(path));
  return lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== 3) throw new Error(`${path}:${i + 2}: expected 3 columns`);
    const [videoPath, speedText, perspective] = cells.map((c) => c.trim());
    const speedKmh = speedText === '' ? null : Number(speedText);
    if (speedKmh !== null && (!Number.isFinite(speedKmh) || speedKmh < 0)) {
      throw new Error(`${path}:${i + 2}: bad speed ${speedText}`);
    }
    if (!['front', 'side', 'unknown'].includes(perspective)) {
      throw new Error(`${path}:${i + 2}: bad perspective ${perspective}`);
    }
    return {
      videoPath: resolve(baseDir, videoPath),
      speedKmh,
      perspective: perspective as GroundTruthRow['perspective'],
    };
  });
}

export function sampleIdForVideo(videoPath: string): string {
  return basename(videoPath).replace(/\.[^.]+$/, '');
}

export function processVideos(config: AdapterConfig): ProcessSummary {
  if (config.frameStride < 1) throw new Error('frameStride must be >= 1');
  const detector = createDetector(config.detector);
  const segmenter = createSegmenter(config.segmenter);
  const depthEstimator = createDepthEstimator(config.depthEstimator);
  const rows = readGroundTruthTable(config.videosTable);

  const samples: ManifestSample[] = [];
  let framesProcessed = 0;
  let framesWithoutDetections = 0;
  for (const row of rows) {
    const video = decodeY4m(row.videoPath);
    const sampleId = sampleIdForVideo(row.videoPath);
    const rasterDir = join(config.outDir, 'rasters', sampleId);
    mkdirSync(rasterDir, { recursive: true });

    const frames: FrameObservation[] = [];
    for (let k = 0; k < video.frames.length; k += config.frameStride) {
      const frame = video.frames[k];
      const detections = detector.detect(frame);
      if (detections.length === 0) framesWithoutDetections += 1;

      const depth = depthEstimator.estimate(frame);
      const mask = resampleMaskNearest(segmenter.segment(frame), depth.width, depth.height);
      const indexTag = String(frame.index).padStart(6, '0');
      const depthPath = join(rasterDir, `depth_${indexTag}.dpth`);
      const maskPath = join(rasterDir, `mask_${indexTag}.mask`);
      writeDepthRaster(depth, depthPath);
      writeMaskRaster(mask, maskPath);

      frames.push({
        frame_index: frame.index,
        detections,
        depth_path: depthPath,
        mask_path: maskPath,
      });
      framesProcessed += 1;
    }
    samples.push({
      sample_id: sampleId,
      fps: video.fps,
      ground_truth_speed_kmh: row.speedKmh,
      perspective: row.perspective,
      frames,
    });
  }

  const manifest: DatasetManifest = {
    metadata: {
      depth_units: depthEstimator.units,
      depth_convention: depthEstimator.convention,
    },
    provenance: {
      detector: detector.id,
      segmenter: segmenter.id,
      depth_estimator: depthEstimator.id,
    },
    samples,
  };
  const manifestPath = join(config.outDir, 'manifest.json');
  writeManifest(manifest, manifestPath);
  return {
    manifestPath,
    samples: samples.length,
    framesProcessed,
    framesWithoutDetections,
  };
}
