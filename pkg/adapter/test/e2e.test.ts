/**
 * End-to-end conformance: adapter output must validate and extract cleanly
 * under the core package's own tools, and annotated frames must carry the
 * frame number (lower right) and actual/predicted speeds (top) overlay.
 */

import { execFileSync } from 'child_process';
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';

import { processVideos, readGroundTruthTable } from '../src/adapter.js';
import {
  drawText,
  encodePpm,
  exportAnnotated,
  formatAnnotation,
  formatSpeed,
  grayToRgb,
  loadSpeedModel,
  predictSpeed,
  textWidth,
} from '../src/annotate.js';
import { syntheticTrafficVideo } from './fixtures.js';

const PYTHON = process.env.SPEEDCAM_PYTHON ?? 'python3';

function makeWorkspace(): { dir: string; table: string } {
  const dir = mkdtempSync(join(tmpdir(), 'adapter-e2e-'));
  const front = syntheticTrafficVideo({ speedKmh: 18, durationS: 2.0 });
  const side = syntheticTrafficVideo({ speedKmh: 36, durationS: 1.5, initialDistanceM: 30 });
  writeFileSync(join(dir, 'front.y4m'), front.y4m);
  writeFileSync(join(dir, 'side.y4m'), side.y4m);
  const table = join(dir, 'videos.csv');
  writeFileSync(
    table,
    'video_path,speed_kmh,perspective\nfront.y4m,18,front\nside.y4m,36,side\n',
  );
  return { dir, table };
}

function writeTestModel(dir: string): string {
  // speed = dist_diff scaled plus duration term; shape matches the core model file
  const model = {
    format_version: 1,
    degree: 1,
    monomials: [
      { exponents: [1, 0, 0], display_name: 't^1' },
      { exponents: [0, 1, 0], display_name: 'area_diff^1' },
      { exponents: [0, 0, 1], display_name: 'dist_diff^1' },
    ],
    intercept: 2.0,
    coefficients: [1.0, 0.0, -60.0],
    feature_means: [0, 0, 0],
    feature_stds: [1, 1, 1],
    split_seed: 0,
    train_fraction: 0.8,
    metrics: { train: {}, test: {} },
  };
  const path = join(dir, 'model.json');
  writeFileSync(path, JSON.stringify(model, null, 2));
  return path;
}

describe('ground truth table', () => {
  it('parses and resolves video paths', () => {
    const { dir, table } = makeWorkspace();
    const rows = readGroundTruthTable(table);
    expect(rows).toHaveLength(2);
    expect(rows[0].videoPath).toBe(join(dir, 'front.y4m'));
    expect(rows[0].speedKmh).toBe(18);
    expect(rows[1].perspective).toBe('side');
  });

  it('rejects malformed tables', () => {
    const dir = mkdtempSync(join(tmpdir(), 'table-'));
    const bad = join(dir, 'bad.csv');
    writeFileSync(bad, 'video,speed\nx.y4m,5\n');
    expect(() => readGroundTruthTable(bad)).toThrow(/expected header/);
  });
});

describe('processVideos conformance', () => {
  it('produces a dataset the core package validates and extracts', () => {
    const { dir, table } = makeWorkspace();
    const out = join(dir, 'dataset');
    const summary = processVideos({
      videosTable: table,
      outDir: out,
      frameStride: 1,
      detector: 'builtin:luma-blob',
      segmenter: 'builtin:luma-mask',
      depthEstimator: 'builtin:luma-depth',
    });
    expect(summary.samples).toBe(2);
    expect(summary.framesWithoutDetections).toBe(0);
    expect(existsSync(summary.manifestPath)).toBe(true);

    // the core reader validates the manifest with zero errors
    execFileSync(PYTHON, [
      '-c',
      `from speedcam.interchange import read_manifest; m = read_manifest(${JSON.stringify(
        summary.manifestPath,
      )}); assert len(m.samples) == 2`,
    ]);

    // the core extract command produces a feature row per sample
    const features = join(dir, 'features.csv');
    const output = execFileSync(
      PYTHON,
      ['-m', 'speedcam.cli', 'extract', '--manifest', summary.manifestPath, '--features', features],
      { encoding: 'utf8' },
    );
    expect(output).toMatch(/extracted 2 samples, skipped 0/);
    const lines = readFileSync(features, 'utf8').trim().split('\n');
    expect(lines[0]).toBe('sample_id,t_seconds,area_diff_px2,dist_diff_depth,speed_kmh,perspective');
    expect(lines).toHaveLength(3);
    const front = lines.find((l) => l.startsWith('front,'))!;
    const [, t, areaDiff, distDiff, speed, perspective] = front.split(',');
    expect(Number(t)).toBeCloseTo(2.0, 9);
    expect(Number(areaDiff)).toBeLessThan(0); // area grows while approaching
    expect(Number(distDiff)).toBeLessThan(0); // larger-is-nearer depth rises
    expect(Number(speed)).toBe(18);
    expect(perspective).toBe('front');
  });

  it('respects the frame stride', () => {
    const { dir, table } = makeWorkspace();
    const out = join(dir, 'dataset-stride');
    const summary = processVideos({
      videosTable: table,
      outDir: out,
      frameStride: 5,
      detector: 'builtin:luma-blob',
      segmenter: 'builtin:luma-mask',
      depthEstimator: 'builtin:luma-depth',
    });
    const doc = JSON.parse(readFileSync(summary.manifestPath, 'utf8'));
    const indices = doc.samples[0].frames.map((f: { frame_index: number }) => f.frame_index);
    expect(indices).toEqual([0, 5, 10, 15, 20]);
  });

  it('pairs resampled masks with half-resolution depth', () => {
    const { dir, table } = makeWorkspace();
    const out = join(dir, 'dataset-half');
    const summary = processVideos({
      videosTable: table,
      outDir: out,
      frameStride: 4,
      detector: 'builtin:luma-blob',
      segmenter: 'builtin:luma-mask',
      depthEstimator: 'builtin:luma-depth-half',
    });
    // the core validator still passes: mask and depth grids agree per frame
    execFileSync(PYTHON, [
      '-m',
      'speedcam.cli',
      'extract',
      '--manifest',
      summary.manifestPath,
      '--features',
      join(dir, 'features-half.csv'),
    ]);
    const doc = JSON.parse(readFileSync(summary.manifestPath, 'utf8'));
    expect(doc.provenance.depth_estimator).toBe('builtin:luma-depth-half');
  });
});

describe('annotated frames', () => {
  it('formats header values like "18 / 21.6"', () => {
    expect(formatSpeed(18)).toBe('18');
    expect(formatSpeed(21.6)).toBe('21.6');
    expect(formatAnnotation(18, 21.600001)).toBe('18 / 21.6');
    expect(formatAnnotation(null, 7.25)).toBe('? / 7.3');
  });

  it('draws glyphs pixel for pixel', () => {
    const img = { width: 9, height: 9, pixels: new Uint8Array(9 * 9 * 3) };
    drawText(img, '1', 1, 1, [255, 255, 0]);
    const lit: [number, number][] = [];
    for (let y = 0; y < 9; y++) {
      for (let x = 0; x < 9; x++) {
        if (img.pixels[3 * (y * 9 + x)] === 255) lit.push([x, y]);
      }
    }
    // the '1' glyph: stem at column offset +2, serif row at the bottom
    expect(lit).toContainEqual([3, 1]);
    expect(lit).toContainEqual([3, 7]);
    expect(lit).toContainEqual([2, 7]);
    expect(lit.length).toBe(10);
  });

  it('writes frames with bbox, header speeds and corner frame number', () => {
    const { dir, table } = makeWorkspace();
    const modelPath = writeTestModel(dir);
    const out = join(dir, 'annotated-out');
    const summary = exportAnnotated({
      videosTable: table,
      modelPath,
      outDir: out,
      frameStride: 1,
      detector: 'builtin:luma-blob',
      segmenter: 'builtin:luma-mask',
      depthEstimator: 'builtin:luma-depth',
    });
    expect(summary.framesWritten).toBeGreaterThan(0);
    expect(summary.framesWithoutOverlay).toBe(0);

    const framePath = join(out, 'annotated', 'front', 'frame_000010.ppm');
    const data = readFileSync(framePath);
    expect(data.subarray(0, 2).toString('ascii')).toBe('P6');
    const headerText = data.toString('ascii', 0, 32);
    const [w, h] = headerText.split('\n')[1].split(' ').map(Number);
    const pixelsAt = (x: number, y: number) => {
      const offset = data.length - w * h * 3 + 3 * (y * w + x);
      return [data[offset], data[offset + 1], data[offset + 2]];
    };
    // bbox outline in red somewhere on the bottom edge band
    let redFound = false;
    for (let x = 0; x < w && !redFound; x++) {
      const [r, g, b] = pixelsAt(x, h - 1);
      redFound = r === 255 && g === 64 && b === 64;
    }
    expect(redFound).toBe(true);
    // header text in yellow in the top-left band
    let headerYellow = 0;
    for (let y = 2; y < 9; y++) {
      for (let x = 2; x < 80; x++) {
        const [r, g, b] = pixelsAt(x, y);
        if (r === 255 && g === 255 && b === 0) headerYellow += 1;
      }
    }
    expect(headerYellow).toBeGreaterThan(10);
    // frame number "10" in yellow in the lower-right corner band
    let cornerYellow = 0;
    const label = '10';
    for (let y = h - 9; y < h - 2; y++) {
      for (let x = w - textWidth(label) - 2; x < w - 2; x++) {
        const [r, g, b] = pixelsAt(x, y);
        if (r === 255 && g === 255 && b === 0) cornerYellow += 1;
      }
    }
    expect(cornerYellow).toBeGreaterThan(5);

    // the very first frame has the corner number but no header prediction
    const first = readFileSync(join(out, 'annotated', 'front', 'frame_000000.ppm'));
    let firstHeaderYellow = 0;
    for (let y = 2; y < 9; y++) {
      for (let x = 2; x < 80; x++) {
        const offset = first.length - w * h * 3 + 3 * (y * w + x);
        if (first[offset] === 255 && first[offset + 1] === 255 && first[offset + 2] === 0) {
          firstHeaderYellow += 1;
        }
      }
    }
    expect(firstHeaderYellow).toBe(0);
  });

  it('prediction matches a direct polynomial evaluation', () => {
    const dir = mkdtempSync(join(tmpdir(), 'model-'));
    const model = loadSpeedModel(writeTestModel(dir));
    const value = predictSpeed(model, 2.0, -350.0, -0.25);
    expect(value).toBeCloseTo(2.0 + 2.0 - 60.0 * -0.25, 12);
  });

  it('round-trips a gray frame to rgb', () => {
    const frame = { index: 0, width: 2, height: 1, luma: new Uint8Array([7, 200]) };
    const img = grayToRgb(frame);
    expect(Array.from(img.pixels)).toEqual([7, 7, 7, 200, 200, 200]);
    const ppm = encodePpm(img);
    expect(ppm.toString('ascii', 0, 11)).toBe('P6\n2 1\n255\n');
  });
});
