/**
 * Model backends behind stable interfaces.
 *
 * Each backend is addressed by an identifier recorded in the output manifest
 * for provenance. The bundled `builtin:*` family is deterministic, runs
 * offline, and treats bright regions as the vehicle, which matches the
 * synthetic test videos; network-served model families (object detectors,
 * instance segmenters, monocular depth estimators) plug in through the same
 * three interfaces without touching the pipeline.
 */

import type { Detection, DepthRaster, MaskRaster } from './interchange.js';
import type { VideoFrame } from './video.js';

export interface DetectorBackend {
  readonly id: string;
  detect(frame: VideoFrame): Detection[];
}

export interface SegmenterBackend {
  readonly id: string;
  segment(frame: VideoFrame): MaskRaster;
}

export interface DepthBackend {
  readonly id: string;
  readonly units: 'relative' | 'metric_m';
  readonly convention: 'larger_is_nearer' | 'larger_is_farther';
  estimate(frame: VideoFrame): DepthRaster;
}

const LUMA_THRESHOLD = 128;
const MIN_COMPONENT_PIXELS = 4;

interface Component {
  pixels: number;
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

function brightComponents(frame: VideoFrame, threshold: number): Component[] {
  const { width, height, luma } = frame;
  const labels = new Int32Array(width * height).fill(-1);
  const components: Component[] = [];
  const stack: number[] = [];
  for (let start = 0; start < luma.length; start++) {
    if (luma[start] <= threshold || labels[start] >= 0) continue;
    const label = components.length;
    const comp: Component = {
      pixels: 0,
      minX: width,
      minY: height,
      maxX: -1,
      maxY: -1,
    };
    stack.push(start);
    labels[start] = label;
    while (stack.length > 0) {
      const at = stack.pop()!;
      const x = at % width;
      const y = (at - x) / width;
      comp.pixels += 1;
      if (x < comp.minX) comp.minX = x;
      if (y < comp.minY) comp.minY = y;
      if (x > comp.maxX) comp.maxX = x;
      if (y > comp.maxY) comp.maxY = y;
      const neighbors = [
        x > 0 ? at - 1 : -1,
        x < width - 1 ? at + 1 : -1,
        y > 0 ? at - width : -1,
        y < height - 1 ? at + width : -1,
      ];
      for (const next of neighbors) {
        if (next >= 0 && labels[next] < 0 && luma[next] > threshold) {
          labels[next] = label;
          stack.push(next);
        }
      }
    }
    components.push(comp);
  }
  return components.filter((c) => c.pixels >= MIN_COMPONENT_PIXELS);
}

/** Bright connected regions become car detections; confidence is bbox fill. */
export class LumaBlobDetector implements DetectorBackend {
  readonly id = 'builtin:luma-blob';

  detect(frame: VideoFrame): Detection[] {
    const detections = brightComponents(frame, LUMA_THRESHOLD).map((c) => {
      const area = (c.maxX + 1 - c.minX) * (c.maxY + 1 - c.minY);
      return {
        class_label: 'car',
        confidence: Math.min(1, c.pixels / area),
        bbox: [c.minX, c.minY, c.maxX + 1, c.maxY + 1] as [number, number, number, number],
      };
    });
    detections.sort((a, b) => b.confidence - a.confidence);
    return detections;
  }
}

/** Bright pixels become the vehicle mask. */
export class LumaMaskSegmenter implements SegmenterBackend {
  readonly id = 'builtin:luma-mask';

  segment(frame: VideoFrame): MaskRaster {
    const values = new Uint8Array(frame.luma.length);
    for (let i = 0; i < values.length; i++) {
      values[i] = frame.luma[i] > LUMA_THRESHOLD ? 1 : 0;
    }
    return { width: frame.width, height: frame.height, values };
  }
}

/**
 * Luma as relative inverse depth (bright = near), the output family of
 * monocular depth models. The `-half` variant emits at half resolution to
 * exercise mask resampling against a foreign raster grid.
 */
export class LumaDepthEstimator implements DepthBackend {
  readonly id: string;
  readonly units = 'relative' as const;
  readonly convention = 'larger_is_nearer' as const;
  private readonly scale: number;

  constructor(half = false) {
    this.id = half ? 'builtin:luma-depth-half' : 'builtin:luma-depth';
    this.scale = half ? 2 : 1;
  }

  estimate(frame: VideoFrame): DepthRaster {
    const width = Math.max(1, Math.floor(frame.width / this.scale));
    const height = Math.max(1, Math.floor(frame.height / this.scale));
    const values = new Float32Array(width * height);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const sx = Math.min(frame.width - 1, x * this.scale);
        const sy = Math.min(frame.height - 1, y * this.scale);
        values[y * width + x] = frame.luma[sy * frame.width + sx] / 255;
      }
    }
    return { width, height, values };
  }
}

/** Nearest-neighbor mask resample onto the depth raster's grid. */
export function resampleMaskNearest(
  mask: MaskRaster,
  width: number,
  height: number,
): MaskRaster {
  if (mask.width === width && mask.height === height) return mask;
  const values = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    const sy = Math.min(mask.height - 1, Math.floor((y * mask.height) / height));
    for (let x = 0; x < width; x++) {
      const sx = Math.min(mask.width - 1, Math.floor((x * mask.width) / width));
      values[y * width + x] = mask.values[sy * mask.width + sx];
    }
  }
  return { width, height, values };
}

export function createDetector(id: string): DetectorBackend {
  if (id === 'builtin:luma-blob') return new LumaBlobDetector();
  throw new Error(`unknown detector backend ${id}`);
}

export function createSegmenter(id: string): SegmenterBackend {
  if (id === 'builtin:luma-mask') return new LumaMaskSegmenter();
  throw new Error(`unknown segmenter backend ${id}`);
}

export function createDepthEstimator(id: string): DepthBackend {
  if (id === 'builtin:luma-depth') return new LumaDepthEstimator(false);
  if (id === 'builtin:luma-depth-half') return new LumaDepthEstimator(true);
  throw new Error(`unknown depth backend ${id}`);
}
