/**
 * Pure overlay compositing: decode each segment's RLE and alpha-blend its
 * color over a base RGBA buffer. Kept free of canvas calls so it runs under
 * plain node tests; the page hands the result to putImageData.
 */
import { decodeRle } from './rle.js';
import type { SegmentPayload } from './api.js';

export interface LabelAnchor {
  x: number;
  y: number;
  text: string;
}

/**
 * Blend segments over a copy of `base` (RGBA, row-major) at the given
 * opacity in [0, 1]. The base buffer is never mutated.
 */
export function compositeOverlay(
  base: Uint8ClampedArray,
  width: number,
  height: number,
  segments: SegmentPayload[],
  opacity: number,
): Uint8ClampedArray {
  if (base.length !== width * height * 4) {
    throw new Error(`base buffer is ${base.length} bytes, expected ${width * height * 4}`);
  }
  const out = new Uint8ClampedArray(base);
  if (opacity <= 0 || segments.length === 0) return out;
  const a = Math.min(opacity, 1);
  for (const segment of segments) {
    const mask = decodeRle(segment.rle, width, height);
    const [r, g, b] = segment.color;
    for (let p = 0; p < mask.length; p++) {
      if (!mask[p]) continue;
      const i = p * 4;
      out[i] = Math.round(out[i]! * (1 - a) + r * a);
      out[i + 1] = Math.round(out[i + 1]! * (1 - a) + g * a);
      out[i + 2] = Math.round(out[i + 2]! * (1 - a) + b * a);
      out[i + 3] = 255;
    }
  }
  return out;
}

/**
 * One label chip per segment, anchored at the mask centroid so the text sits
 * inside the blob for typical shapes.
 */
export function labelAnchors(
  segments: SegmentPayload[],
  width: number,
  height: number,
): LabelAnchor[] {
  const anchors: LabelAnchor[] = [];
  for (const segment of segments) {
    const mask = decodeRle(segment.rle, width, height);
    let sx = 0;
    let sy = 0;
    let n = 0;
    for (let p = 0; p < mask.length; p++) {
      if (!mask[p]) continue;
      sx += p % width;
      sy += Math.floor(p / width);
      n++;
    }
    if (n === 0) continue;
    anchors.push({ x: sx / n, y: sy / n, text: segment.category_name });
  }
  return anchors;
}
