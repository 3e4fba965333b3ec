/**
 * Annotated-frame export: each sampled frame is rendered as a PPM image with
 * the detection bbox outlined, "actual / predicted" speed in the top-left
 * header and the frame number in the lower-right corner.
 *
 * Predictions come from a fitted core model file; per-frame features are the
 * running first-to-current differences (duration, bbox area, mean masked
 * depth), so the overlay shows how the estimate evolves as the vehicle nears
 * the camera.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'fs';
import { join } from 'path';

import { readGroundTruthTable, sampleIdForVideo } from './adapter.js';
import type { Detection } from './interchange.js';
import {
  createDepthEstimator,
  createDetector,
  createSegmenter,
  resampleMaskNearest,
} from './models.js';
import { decodeY4m, VideoFrame } from './video.js';

export interface SpeedModel {
  degree: number;
  monomials: { exponents: [number, number, number]; display_name: string }[];
  intercept: number;
  coefficients: number[];
}

export function loadSpeedModel(path: string): SpeedModel {
  const doc = JSON.parse(readFileSync(path, 'utf8'));
  if (doc.format_version !== 1) throw new Error(`${path}: unsupported model format`);
  if (!Array.isArray(doc.monomials) || doc.monomials.length !== doc.coefficients.length) {
    throw new Error(`${path}: malformed model document`);
  }
  return {
    degree: doc.degree,
    monomials: doc.monomials,
    intercept: doc.intercept,
    coefficients: doc.coefficients,
  };
}

export function predictSpeed(
  model: SpeedModel,
  t: number,
  areaDiff: number,
  distDiff: number,
): number {
  let total = model.intercept;
  for (let j = 0; j < model.monomials.length; j++) {
    const [a, b, c] = model.monomials[j].exponents;
    total += model.coefficients[j] * t ** a * areaDiff ** b * distDiff ** c;
  }
  return total;
}

/** "18 / 21.6" style header values: one decimal, integral values bare. */
export function formatSpeed(value: number): string {
  const rounded = Math.round(value * 10) / 10;
  return Number.isInteger(rounded) ? String(rounded) : rounded.toFixed(1);
}

export function formatAnnotation(actual: number | null, predicted: number): string {
  const left = actual === null ? '?' : formatSpeed(actual);
  return `${left} / ${formatSpeed(predicted)}`;
}

// --- tiny raster text -------------------------------------------------------

const GLYPH_HEIGHT = 7;
const GLYPHS: Record<string, string[]> = {
  '0': ['01110', '10001', '10011', '10101', '11001', '10001', '01110'],
  '1': ['00100', '01100', '00100', '00100', '00100', '00100', '01110'],
  '2': ['01110', '10001', '00001', '00110', '01000', '10000', '11111'],
  '3': ['01110', '10001', '00001', '00110', '00001', '10001', '01110'],
  '4': ['00010', '00110', '01010', '10010', '11111', '00010', '00010'],
  '5': ['11111', '10000', '11110', '00001', '00001', '10001', '01110'],
  '6': ['01110', '10000', '11110', '10001', '10001', '10001', '01110'],
  '7': ['11111', '00001', '00010', '00100', '01000', '01000', '01000'],
  '8': ['01110', '10001', '10001', '01110', '10001', '10001', '01110'],
  '9': ['01110', '10001', '10001', '01111', '00001', '00001', '01110'],
  '.': ['00000', '00000', '00000', '00000', '00000', '01100', '01100'],
  '/': ['00001', '00010', '00100', '00100', '01000', '10000', '10000'],
  '-': ['00000', '00000', '00000', '11111', '00000', '00000', '00000'],
  '?': ['01110', '10001', '00001', '00110', '00100', '00000', '00100'],
  ' ': ['00000', '00000', '00000', '00000', '00000', '00000', '00000'],
};

export interface RgbImage {
  width: number;
  height: number;
  /** interleaved RGB, length width*height*3 */
  pixels: Uint8Array;
}

export function grayToRgb(frame: VideoFrame): RgbImage {
  const pixels = new Uint8Array(frame.width * frame.height * 3);
  for (let i = 0; i < frame.luma.length; i++) {
    pixels[3 * i] = pixels[3 * i + 1] = pixels[3 * i + 2] = frame.luma[i];
  }
  return { width: frame.width, height: frame.height, pixels };
}

function putPixel(img: RgbImage, x: number, y: number, rgb: [number, number, number]): void {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const at = 3 * (y * img.width + x);
  img.pixels[at] = rgb[0];
  img.pixels[at + 1] = rgb[1];
  img.pixels[at + 2] = rgb[2];
}

export function drawRect(
  img: RgbImage,
  bbox: [number, number, number, number],
  rgb: [number, number, number],
): void {
  const [x1, y1, x2, y2] = bbox.map(Math.round);
  for (let x = x1; x < x2; x++) {
    putPixel(img, x, y1, rgb);
    putPixel(img, x, y2 - 1, rgb);
  }
  for (let y = y1; y < y2; y++) {
    putPixel(img, x1, y, rgb);
    putPixel(img, x2 - 1, y, rgb);
  }
}

export function textWidth(text: string): number {
  return text.length * 6 - 1;
}

export function drawText(
  img: RgbImage,
  text: string,
  x: number,
  y: number,
  rgb: [number, number, number],
): void {
  let penX = x;
  for (const ch of text) {
    const glyph = GLYPHS[ch] ?? GLYPHS['?'];
    for (let row = 0; row < GLYPH_HEIGHT; row++) {
      for (let col = 0; col < 5; col++) {
        if (glyph[row][col] === '1') putPixel(img, penX + col, y + row, rgb);
      }
    }
    penX += 6;
  }
}

export function encodePpm(img: RgbImage): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(img.pixels)]);
}

// --- export pipeline -----------------------------------------------------------

export interface AnnotateConfig {
  videosTable: string;
  modelPath: string;
  outDir: string;
  frameStride: number;
  detector: string;
  segmenter: string;
  depthEstimator: string;
}

export interface AnnotateSummary {
  framesWritten: number;
  framesWithoutOverlay: number;
  outDirs: string[];
}

const BBOX_COLOR: [number, number, number] = [255, 64, 64];
const TEXT_COLOR: [number, number, number] = [255, 255, 0];
const HEADER_POS = { x: 2, y: 2 };

function meanMaskedDepth(values: Float32Array, mask: Uint8Array): number | null {
  let total = 0;
  let count = 0;
  for (let i = 0; i < values.length; i++) {
    if (mask[i] === 1) {
      total += values[i];
      count += 1;
    }
  }
  return count === 0 ? null : total / count;
}

export function exportAnnotated(config: AnnotateConfig): AnnotateSummary {
  const model = loadSpeedModel(config.modelPath);
  const detector = createDetector(config.detector);
  const segmenter = createSegmenter(config.segmenter);
  const depthEstimator = createDepthEstimator(config.depthEstimator);
  const rows = readGroundTruthTable(config.videosTable);

  let framesWritten = 0;
  let framesWithoutOverlay = 0;
  const outDirs: string[] = [];
  for (const row of rows) {
    const video = decodeY4m(row.videoPath);
    const outDir = join(config.outDir, 'annotated', sampleIdForVideo(row.videoPath));
    mkdirSync(outDir, { recursive: true });
    outDirs.push(outDir);

    let first: { index: number; area: number; depth: number } | null = null;
    for (let k = 0; k < video.frames.length; k += config.frameStride) {
      const frame = video.frames[k];
      const img = grayToRgb(frame);
      const detections = detector.detect(frame);
      if (detections.length === 0) {
        framesWithoutOverlay += 1;
      } else {
        const primary = pickLargest(detections);
        drawRect(img, primary.bbox, BBOX_COLOR);
        const depth = depthEstimator.estimate(frame);
        const mask = resampleMaskNearest(segmenter.segment(frame), depth.width, depth.height);
        const meanDepth = meanMaskedDepth(depth.values, mask.values);
        const area =
          (primary.bbox[2] - primary.bbox[0]) * (primary.bbox[3] - primary.bbox[1]);
        if (first === null && meanDepth !== null) {
          first = { index: frame.index, area, depth: meanDepth };
        } else if (first !== null && meanDepth !== null && frame.index > first.index) {
          const t = (frame.index - first.index) / video.fps;
          const predicted = predictSpeed(
            model,
            t,
            first.area - area,
            first.depth - meanDepth,
          );
          drawText(
            img,
            formatAnnotation(row.speedKmh, predicted),
            HEADER_POS.x,
            HEADER_POS.y,
            TEXT_COLOR,
          );
        }
      }
      const frameLabel = String(frame.index);
      drawText(
        img,
        frameLabel,
        img.width - textWidth(frameLabel) - 2,
        img.height - GLYPH_HEIGHT - 2,
        TEXT_COLOR,
      );
      const name = `frame_${String(frame.index).padStart(6, '0')}.ppm`;
      writeFileSync(join(outDir, name), encodePpm(img));
      framesWritten += 1;
    }
  }
  return { framesWritten, framesWithoutOverlay, outDirs };
}

function pickLargest(detections: Detection[]): Detection {
  return detections.reduce((best, d) => {
    const area = (d.bbox[2] - d.bbox[0]) * (d.bbox[3] - d.bbox[1]);
    const bestArea = (best.bbox[2] - best.bbox[0]) * (best.bbox[3] - best.bbox[1]);
    return area > bestArea ? d : best;
  });
}
