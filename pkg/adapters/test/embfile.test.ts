import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { batchEmbed } from '../src/batch.js';
import { readEmbeddingFile, writeEmbeddingFile } from '../src/embfile.js';
import { defaultRegistry } from '../src/models.js';

function tempDir(): string {
  return mkdtempSync(join(tmpdir(), 'ticl-adapters-'));
}

function writeManifestFile(dir: string, rows: object[]): string {
  const path = join(dir, 'pool.jsonl');
  writeFileSync(path, rows.map((row) => `${JSON.stringify(row)}\n`).join(''), 'utf8');
  return path;
}

const record = (id: string, transcript: string) => ({
  id,
  audio_path: `audio/${id}.wav`,
  transcript,
  duration_s: 2.5,
  language: 'en',
  split: 'train',
});

describe('embedding file format', () => {
  it('round-trips header, rows, and ids', () => {
    const dir = tempDir();
    const path = join(dir, 'vectors.emb');
    const rows = [Float32Array.from([1, 2, 3]), Float32Array.from([4, 5, 6])];
    writeEmbeddingFile(path, ['a', 'b'], 3, rows);

    const raw = readFileSync(path);
    expect(raw.toString('ascii', 0, 8)).toBe('TICLEMB1');
    expect(raw.readUInt32LE(8)).toBe(3);
    expect(Number(raw.readBigUInt64LE(12))).toBe(2);

    const loaded = readEmbeddingFile(path);
    expect(loaded.ids).toEqual(['a', 'b']);
    expect([...loaded.rows[1]]).toEqual([4, 5, 6]);
  });

  it('writes an empty header-only file for zero records', () => {
    const dir = tempDir();
    const path = join(dir, 'empty.emb');
    writeEmbeddingFile(path, [], 64, []);
    const loaded = readEmbeddingFile(path);
    expect(loaded.ids).toEqual([]);
    expect(loaded.dim).toBe(64);
  });
});

describe('batch embed', () => {
  it('aligns rows with manifest order', () => {
    const dir = tempDir();
    const manifest = writeManifestFile(dir, [
      record('first', 'one sentence here'),
      record('second', 'another sentence entirely'),
      record('third', 'a final line of text'),
    ]);
    const out = join(dir, 'out.emb');
    const result = batchEmbed(defaultRegistry(), manifest, 'hash-ngram', out);
    expect(result.count).toBe(3);
    expect(result.dim).toBe(64);
    const loaded = readEmbeddingFile(out);
    expect(loaded.ids).toEqual(['first', 'second', 'third']);
  });

  it('is byte-identical across reruns', () => {
    const dir = tempDir();
    const manifest = writeManifestFile(dir, [record('a', 'stable bytes wanted')]);
    const out1 = join(dir, 'a.emb');
    const out2 = join(dir, 'b.emb');
    batchEmbed(defaultRegistry(), manifest, 'hash-ngram', out1);
    batchEmbed(defaultRegistry(), manifest, 'hash-ngram', out2);
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true);
    expect(readFileSync(`${out1}.ids`, 'utf8')).toBe(readFileSync(`${out2}.ids`, 'utf8'));
  });

  it('flags unembeddable records as failed sentinels', () => {
    const dir = tempDir();
    const manifest = writeManifestFile(dir, [
      record('ok', 'plenty of words'),
      { ...record('blank', ''), split: 'test' },
    ]);
    const out = join(dir, 'f.emb');
    const result = batchEmbed(defaultRegistry(), manifest, 'hash-ngram', out);
    expect(result.failedIds).toEqual(['blank']);
    const loaded = readEmbeddingFile(out);
    expect(loaded.failedIds.has('blank')).toBe(true);
    expect([...loaded.rows[1]].every((v) => v === 0)).toBe(true);
  });

  it('rejects duplicate manifest ids', () => {
    const dir = tempDir();
    const manifest = writeManifestFile(dir, [record('x', 'one'), record('x', 'two')]);
    expect(() => batchEmbed(defaultRegistry(), manifest, 'hash-ngram', join(dir, 'x.emb')))
      .toThrowError(/duplicate/);
  });
});
