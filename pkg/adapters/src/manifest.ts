/** JSONL pool manifest reader (the toolkit's manifest exchange format). */

import { readFileSync } from 'node:fs';

export interface ManifestRecord {
  id: string;
  audio_path: string;
  transcript: string;
  duration_s: number;
  language: string;
  split: string;
  speaker_id?: string;
}

export function readManifest(path: string): ManifestRecord[] {
  const records: ManifestRecord[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, 'utf8').split('\n');
  lines.forEach((line, index) => {
    if (!line.trim()) return;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new Error(`manifest line ${index + 1}: invalid JSON`);
    }
    const record = raw as ManifestRecord;
    for (const field of ['id', 'audio_path', 'transcript', 'duration_s', 'language', 'split']) {
      if (!(field in (record as object))) {
        throw new Error(`manifest line ${index + 1}: missing field ${field}`);
      }
    }
    if (seen.has(record.id)) {
      throw new Error(`duplicate record id ${record.id}`);
    }
    seen.add(record.id);
    records.push(record);
  });
  return records;
}
