/**
 * Minimal YUV4MPEG2 (.y4m) decoder.
 *
 * Supports the plain uncompressed stream layout: one `YUV4MPEG2 ...` header
 * line, then `FRAME\n` + planar payload per frame. Chroma subsamplings
 * C420*, C422, C444 and Cmono are accepted; only the luma plane is kept,
 * which is all the bundled backends consume.
 */

import { readFileSync } from 'fs';

export interface VideoFrame {
  index: number;
  width: number;
  height: number;
  /** luma plane, row-major, length width*height */
  luma: Uint8Array;
}

export interface DecodedVideo {
  width: number;
  height: number;
  fps: number;
  frames: VideoFrame[];
}

function chromaBytes(colorspace: string, width: number, height: number): number {
  if (colorspace.startsWith('C420')) {
    return 2 * Math.ceil(width / 2) * Math.ceil(height / 2);
  }
  if (colorspace.startsWith('C422')) {
    return 2 * Math.ceil(width / 2) * height;
  }
  if (colorspace.startsWith('C444')) {
    return 2 * width * height;
  }
  if (colorspace.startsWith('Cmono')) {
    return 0;
  }
  throw new Error(`unsupported y4m colorspace ${colorspace}`);
}

export function decodeY4m(path: string): DecodedVideo {
  const data = readFileSync(path);
  const headerEnd = data.indexOf(0x0a);
  if (headerEnd < 0) throw new Error(`${path}: missing y4m header`);
  const header = data.toString('ascii', 0, headerEnd);
  if (!header.startsWith('YUV4MPEG2')) throw new Error(`${path}: not a YUV4MPEG2 stream`);

  let width = 0;
  let height = 0;
  let fps = 0;
  let colorspace = 'C420';
  for (const token of header.split(' ').slice(1)) {
    if (token.startsWith('W')) width = parseInt(token.slice(1), 10);
    else if (token.startsWith('H')) height = parseInt(token.slice(1), 10);
    else if (token.startsWith('F')) {
      const [num, den] = token.slice(1).split(':').map(Number);
      if (!num || !den) throw new Error(`${path}: bad frame rate ${token}`);
      fps = num / den;
    } else if (token.startsWith('C')) colorspace = token;
  }
  if (width < 1 || height < 1) throw new Error(`${path}: bad dimensions ${width}x${height}`);
  if (fps <= 0) throw new Error(`${path}: missing frame rate`);

  const lumaBytes = width * height;
  const frameBytes = lumaBytes + chromaBytes(colorspace, width, height);
  const frames: VideoFrame[] = [];
  let offset = headerEnd + 1;
  while (offset < data.length) {
    const markerEnd = data.indexOf(0x0a, offset);
    if (markerEnd < 0) throw new Error(`${path}: truncated FRAME marker`);
    const marker = data.toString('ascii', offset, markerEnd);
    if (!marker.startsWith('FRAME')) throw new Error(`${path}: expected FRAME, got ${marker}`);
    const start = markerEnd + 1;
    if (start + frameBytes > data.length) throw new Error(`${path}: truncated frame payload`);
    frames.push({
      index: frames.length,
      width,
      height,
      luma: new Uint8Array(data.subarray(start, start + lumaBytes)),
    });
    offset = start + frameBytes;
  }
  return { width, height, fps, frames };
}

/** Encode grayscale frames as a Cmono y4m stream (used by tests and tools). */
export function encodeY4mMono(
  frames: Uint8Array[],
  width: number,
  height: number,
  fps: number,
): Buffer {
  const header = Buffer.from(`YUV4MPEG2 W${width} H${height} F${Math.round(fps)}:1 Ip A1:1 Cmono\n`);
  const parts: Buffer[] = [header];
  for (const luma of frames) {
    if (luma.length !== width * height) throw new Error('frame size mismatch');
    parts.push(Buffer.from('FRAME\n'), Buffer.from(luma));
  }
  return Buffer.concat(parts);
}
