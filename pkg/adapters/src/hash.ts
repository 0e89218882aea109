/**
 * Deterministic reference models, shared by the service and the batch CLI.
 *
 * The trigram text embedder mirrors the toolkit's built-in "hash-ngram"
 * embedder bucket-for-bucket (sha256 over padded lowercase character
 * trigrams, 64 signed buckets), so embedding files produced here can be
 * indexed and queried by the main package without a model in the loop.
 */

import { createHash } from 'node:crypto';

export const HASH_NGRAM_DIM = 64;

export function embedTextTrigram(text: string, dim: number = HASH_NGRAM_DIM): Float64Array {
  const vec = new Float64Array(dim);
  const stripped = text.trim();
  if (stripped.length === 0) {
    return vec;
  }
  const padded = ` ${stripped.toLowerCase()} `;
  const chars = Array.from(padded);
  for (let i = 0; i + 2 < chars.length; i++) {
    const digest = createHash('sha256')
      .update(Buffer.from(chars[i] + chars[i + 1] + chars[i + 2], 'utf8'))
      .digest();
    const bucket = digest.readUInt32LE(0) % dim;
    const sign = (digest[4] & 1) === 1 ? 1.0 : -1.0;
    vec[bucket] += sign;
  }
  return vec;
}

/** Per-frame audio features derived purely from the byte content. */
export function audioFrames(audio: Buffer, dim = 8, chunkBytes = 64, maxFrames = 256): number[][] {
  const frameCount = Math.min(maxFrames, Math.max(1, Math.ceil(audio.length / chunkBytes)));
  const frames: number[][] = [];
  for (let t = 0; t < frameCount; t++) {
    const chunk = audio.subarray(t * chunkBytes, (t + 1) * chunkBytes);
    const digest = createHash('sha256').update(Buffer.from([t & 0xff])).update(chunk).digest();
    const frame: number[] = [];
    for (let j = 0; j < dim; j++) {
      // Map 4 digest bytes onto [-1, 1).
      frame.push(digest.readUInt32LE(j * 4) / 2147483648.0 - 1.0);
    }
    frames.push(frame);
  }
  return frames;
}

/** Decode bytes as UTF-8 text; anything non-textual comes back empty. */
export function decodeAudioAsText(audio: Buffer): string {
  const text = audio.toString('utf8');
  if (Buffer.from(text, 'utf8').equals(audio)) {
    return text.trim();
  }
  return '';
}
