/**
 * Binary embedding file writer/reader (magic "TICLEMB1").
 *
 * Layout, little-endian: 8-byte magic, u32 dim, u64 count, then count
 * rows of dim float32 values. Row ids go to a "<path>.ids" sidecar, one
 * per line; rows the embedder could not produce are written as zeros
 * and flagged with a tab-separated "!failed" marker on their id line.
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const MAGIC = 'TICLEMB1';
export const FAILED_FLAG = '!failed';
const HEADER_BYTES = 20;

export interface EmbeddingFile {
  ids: string[];
  dim: number;
  rows: Float32Array[];
  failedIds: Set<string>;
}

export function sidecarPath(embPath: string): string {
  return `${embPath}.ids`;
}

export function writeEmbeddingFile(
  path: string,
  ids: string[],
  dim: number,
  rows: Float32Array[],
  failedIds: Set<string> = new Set(),
): void {
  if (rows.length !== ids.length) {
    throw new Error(`${ids.length} ids but ${rows.length} rows`);
  }
  const buffer = Buffer.alloc(HEADER_BYTES + 4 * dim * rows.length);
  buffer.write(MAGIC, 0, 'ascii');
  buffer.writeUInt32LE(dim, 8);
  buffer.writeBigUInt64LE(BigInt(rows.length), 12);
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new Error(`row ${i} has ${row.length} values, expected ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      buffer.writeFloatLE(row[j], HEADER_BYTES + 4 * (i * dim + j));
    }
  });
  writeFileSync(path, buffer);

  const lines = ids.map((id) => (failedIds.has(id) ? `${id}\t${FAILED_FLAG}` : id));
  writeFileSync(sidecarPath(path), lines.map((line) => `${line}\n`).join(''), 'utf8');
}

export function readEmbeddingFile(path: string): EmbeddingFile {
  const raw = readFileSync(path);
  if (raw.length < HEADER_BYTES || raw.toString('ascii', 0, 8) !== MAGIC) {
    throw new Error(`${path}: not a ${MAGIC} file`);
  }
  const dim = raw.readUInt32LE(8);
  const count = Number(raw.readBigUInt64LE(12));
  if (raw.length !== HEADER_BYTES + 4 * dim * count) {
    throw new Error(`${path}: truncated body`);
  }
  const rows: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const row = new Float32Array(dim);
    for (let j = 0; j < dim; j++) {
      row[j] = raw.readFloatLE(HEADER_BYTES + 4 * (i * dim + j));
    }
    rows.push(row);
  }

  const ids: string[] = [];
  const failedIds = new Set<string>();
  const sidecar = readFileSync(sidecarPath(path), 'utf8');
  for (const line of sidecar.split('\n')) {
    if (!line) continue;
    const parts = line.split('\t');
    ids.push(parts[0]);
    if (parts.slice(1).includes(FAILED_FLAG)) {
      failedIds.add(parts[0]);
    }
  }
  if (ids.length !== count) {
    throw new Error(`${path}: ${ids.length} sidecar ids for ${count} rows`);
  }
  return { ids, dim, rows, failedIds };
}
