/**
 * Run-length codec for binary masks, matching the service wire format:
 * counts alternate zero-runs and one-runs over the mask flattened in
 * column-major order, and the first count always covers zeros (so a mask
 * whose first pixel is set starts with an explicit 0).
 */

/** Thrown when the run counts do not cover the image exactly. */
export class RleLengthError extends Error {
  constructor(got: number, expected: number) {
    super(`RLE counts sum to ${got}, expected ${expected}`);
    this.name = 'RleLengthError';
  }
}

/**
 * Decode run counts into a row-major Uint8Array of 0/1 values,
 * indexed as mask[y * width + x].
 */
export function decodeRle(counts: number[], width: number, height: number): Uint8Array {
  const total = width * height;
  let sum = 0;
  for (const c of counts) sum += c;
  if (sum !== total) throw new RleLengthError(sum, total);

  const mask = new Uint8Array(total);
  let pos = 0; // column-major position: pos = x * height + y
  let value = 0;
  for (const c of counts) {
    if (value === 1) {
      for (let k = pos; k < pos + c; k++) {
        const x = Math.floor(k / height);
        const y = k % height;
        mask[y * width + x] = 1;
      }
    }
    pos += c;
    value ^= 1;
  }
  return mask;
}

/** Encode a row-major 0/1 mask back into column-major run counts. */
export function encodeRle(mask: ArrayLike<number>, width: number, height: number): number[] {
  const total = width * height;
  if (mask.length !== total) throw new RleLengthError(mask.length, total);
  const counts: number[] = [];
  let value = 0; // runs start at zero by convention
  let run = 0;
  for (let k = 0; k < total; k++) {
    const x = Math.floor(k / height);
    const y = k % height;
    const bit = mask[y * width + x] ? 1 : 0;
    if (bit === value) {
      run++;
    } else {
      counts.push(run);
      value = bit;
      run = 1;
    }
  }
  counts.push(run);
  return counts;
}

/** Foreground pixel count straight from the runs, without decoding. */
export function rleArea(counts: number[]): number {
  let area = 0;
  for (let i = 1; i < counts.length; i += 2) area += counts[i] ?? 0;
  return area;
}
