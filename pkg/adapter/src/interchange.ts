/**
 * Writers (and verification readers) for the speedcam interchange formats.
 *
 * Depth raster: `DPTH` magic, version 0x01, u32 LE width, u32 LE height,
 * then width*height float32 LE row-major. Mask raster: `MASK` magic, same
 * header, payload u8 in {0, 1}. The dataset manifest is one JSON document
 * whose raster paths are relative to its own directory.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'fs';
import { dirname, relative } from 'path';

export const FORMAT_VERSION = 1;
const HEADER_BYTES = 13;

export interface DepthRaster {
  width: number;
  height: number;
  /** row-major, length width*height */
  values: Float32Array;
}

export interface MaskRaster {
  width: number;
  height: number;
  /** row-major, {0,1}, length width*height */
  values: Uint8Array;
}

export interface Detection {
  class_label: string;
  confidence: number;
  /** [x1, y1, x2, y2] pixels, origin top-left */
  bbox: [number, number, number, number];
}

export interface FrameObservation {
  frame_index: number;
  detections: Detection[];
  depth_path: string | null;
  mask_path: string | null;
}

export interface ManifestSample {
  sample_id: string;
  fps: number;
  ground_truth_speed_kmh: number | null;
  perspective: 'front' | 'side' | 'unknown';
  frames: FrameObservation[];
}

export interface DatasetManifest {
  metadata: {
    depth_units: 'relative' | 'metric_m';
    depth_convention: 'larger_is_nearer' | 'larger_is_farther';
  };
  /** Model identifiers, for provenance; ignored by the core reader. */
  provenance?: Record<string, string>;
  samples: ManifestSample[];
}

function packHeader(magic: string, width: number, height: number): Buffer {
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(magic, 0, 4, 'ascii');
  header.writeUInt8(FORMAT_VERSION, 4);
  header.writeUInt32LE(width, 5);
  header.writeUInt32LE(height, 9);
  return header;
}

export function writeDepthRaster(raster: DepthRaster, path: string): void {
  const { width, height, values } = raster;
  if (values.length !== width * height) {
    throw new Error(`depth raster ${path}: ${values.length} values for ${width}x${height}`);
  }
  for (const v of values) {
    if (!Number.isFinite(v)) throw new Error(`depth raster ${path}: non-finite value`);
  }
  const payload = Buffer.alloc(values.length * 4);
  values.forEach((v, i) => payload.writeFloatLE(v, i * 4));
  writeFileSync(path, Buffer.concat([packHeader('DPTH', width, height), payload]));
}

export function writeMaskRaster(mask: MaskRaster, path: string): void {
  const { width, height, values } = mask;
  if (values.length !== width * height) {
    throw new Error(`mask raster ${path}: ${values.length} values for ${width}x${height}`);
  }
  for (const v of values) {
    if (v !== 0 && v !== 1) throw new Error(`mask raster ${path}: value ${v} outside {0,1}`);
  }
  writeFileSync(path, Buffer.concat([packHeader('MASK', width, height), Buffer.from(values)]));
}

function readHeader(data: Buffer, magic: string, path: string): [number, number] {
  if (data.length < HEADER_BYTES) throw new Error(`${path}: truncated header`);
  if (data.toString('ascii', 0, 4) !== magic) throw new Error(`${path}: bad magic`);
  if (data.readUInt8(4) !== FORMAT_VERSION) throw new Error(`${path}: bad version`);
  return [data.readUInt32LE(5), data.readUInt32LE(9)];
}

export function readDepthRaster(path: string): DepthRaster {
  const data = readFileSync(path);
  const [width, height] = readHeader(data, 'DPTH', path);
  if (data.length !== HEADER_BYTES + width * height * 4) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    values[i] = data.readFloatLE(HEADER_BYTES + i * 4);
  }
  return { width, height, values };
}

export function readMaskRaster(path: string): MaskRaster {
  const data = readFileSync(path);
  const [width, height] = readHeader(data, 'MASK', path);
  if (data.length !== HEADER_BYTES + width * height) {
    throw new Error(`${path}: payload size mismatch`);
  }
  return { width, height, values: new Uint8Array(data.subarray(HEADER_BYTES)) };
}

/** Write the manifest with raster paths relativized to its directory. */
export function writeManifest(manifest: DatasetManifest, path: string): void {
  const baseDir = dirname(path);
  const doc = {
    metadata: manifest.metadata,
    ...(manifest.provenance ? { provenance: manifest.provenance } : {}),
    samples: manifest.samples.map((s) => ({
      sample_id: s.sample_id,
      fps: s.fps,
      ground_truth_speed_kmh: s.ground_truth_speed_kmh,
      perspective: s.perspective,
      frames: s.frames.map((f) => ({
        frame_index: f.frame_index,
        detections: f.detections,
        depth_path: f.depth_path === null ? null : relative(baseDir, f.depth_path),
        mask_path: f.mask_path === null ? null : relative(baseDir, f.mask_path),
      })),
    })),
  };
  mkdirSync(baseDir, { recursive: true });
  writeFileSync(path, JSON.stringify(doc, null, 2) + '\n');
}
