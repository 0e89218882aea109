/**
 * Batch embedding extraction: manifest in, TICLEMB1 file + id sidecar out.
 *
 * Rows align with manifest line order. A record the embedder cannot
 * handle (blank transcript hashes to the zero vector) becomes a zero
 * sentinel row flagged in the sidecar; the run itself never aborts on a
 * single record. Reruns overwrite byte-identically.
 */

import { writeEmbeddingFile } from './embfile.js';
import { readManifest } from './manifest.js';
import { ModelRegistry } from './models.js';

export interface BatchEmbedResult {
  count: number;
  dim: number;
  failedIds: string[];
}

export function batchEmbed(
  registry: ModelRegistry,
  poolManifest: string,
  modelId: string,
  outputPath: string,
): BatchEmbedResult {
  const model = registry.textEmbedder(modelId);
  const records = readManifest(poolManifest);
  const ids: string[] = [];
  const rows: Float32Array[] = [];
  const failed = new Set<string>();
  for (const record of records) {
    ids.push(record.id);
    const vector = model.embed(record.transcript);
    const row = Float32Array.from(vector, (v) => Math.fround(v));
    if (row.every((v) => v === 0)) {
      failed.add(record.id);
    }
    rows.push(row);
  }
  writeEmbeddingFile(outputPath, ids, model.dim, rows, failed);
  return { count: ids.length, dim: model.dim, failedIds: [...failed].sort() };
}
