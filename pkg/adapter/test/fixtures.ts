/**
 * Synthetic approaching-vehicle test video: a bright rectangle on a dark
 * road scene, sized by the pinhole law and brightening as it nears the
 * camera so the luma-based depth proxy changes frame to frame.
 */

import { encodeY4mMono } from '../src/video.js';

export interface TrafficVideoOptions {
  width?: number;
  height?: number;
  fps?: number;
  durationS?: number;
  focalPx?: number;
  vehicleWidthM?: number;
  vehicleHeightM?: number;
  initialDistanceM?: number;
  speedKmh?: number;
  backgroundLuma?: number;
}

export interface TrafficVideo {
  y4m: Buffer;
  width: number;
  height: number;
  fps: number;
  frameCount: number;
  /** noiseless bbox per frame, [x1, y1, x2, y2] */
  bboxes: [number, number, number, number][];
}

export function syntheticTrafficVideo(options: TrafficVideoOptions = {}): TrafficVideo {
  const {
    width = 160,
    height = 120,
    fps = 10,
    durationS = 2.0,
    focalPx = 100,
    vehicleWidthM = 1.8,
    vehicleHeightM = 1.5,
    initialDistanceM = 20,
    speedKmh = 18,
    backgroundLuma = 16,
  } = options;
  const frameCount = Math.floor(durationS * fps) + 1;
  const frames: Uint8Array[] = [];
  const bboxes: [number, number, number, number][] = [];
  for (let k = 0; k < frameCount; k++) {
    const z = initialDistanceM - (speedKmh / 3.6) * (k / fps);
    if (z <= 0) throw new Error('vehicle passes the camera; shorten the fixture');
    const bw = (focalPx * vehicleWidthM) / z;
    const bh = (focalPx * vehicleHeightM) / z;
    const bbox: [number, number, number, number] = [
      width / 2 - bw / 2,
      height - bh,
      width / 2 + bw / 2,
      height,
    ];
    bboxes.push(bbox);
    // nearer -> brighter, so the relative-depth proxy varies with distance
    const luma = Math.max(140, Math.min(250, Math.round(255 - z * 6)));
    const frame = new Uint8Array(width * height).fill(backgroundLuma);
    const x0 = Math.max(0, Math.floor(bbox[0]));
    const x1 = Math.min(width, Math.ceil(bbox[2]));
    const y0 = Math.max(0, Math.floor(bbox[1]));
    const y1 = Math.min(height, Math.ceil(bbox[3]));
    for (let y = y0; y < y1; y++) {
      frame.fill(luma, y * width + x0, y * width + x1);
    }
    frames.push(frame);
  }
  return {
    y4m: encodeY4mMono(frames, width, height, fps),
    width,
    height,
    fps,
    frameCount,
    bboxes,
  };
}
