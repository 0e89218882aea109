/**
 * Wire protocol schemas and the context interleaving guard.
 *
 * Requests carry {kind, model_id, payload, request_id}; responses echo
 * the request_id and carry exactly one of {text, vector, frames} on
 * success. Generation payloads are the serialized dialogue contexts
 * produced by the main toolkit: alternating user/assistant turns ending
 * on the test query.
 */

import { z } from 'zod';

export const TurnSchema = z.object({
  role: z.enum(['user', 'assistant']),
  text: z.string(),
  audio_path: z.string().optional(),
  audio_b64: z.string().optional(),
});
export type Turn = z.infer<typeof TurnSchema>;

export const GeneratePayloadSchema = z.object({
  model: z.string().optional(),
  turns: z.array(TurnSchema).min(1),
  decode_params: z.record(z.string(), z.unknown()).optional(),
  metadata: z.record(z.string(), z.unknown()).optional(),
});
export type GeneratePayload = z.infer<typeof GeneratePayloadSchema>;

export const AdapterRequestSchema = z.object({
  kind: z.enum(['transcribe', 'embed_text', 'embed_audio', 'generate']),
  model_id: z.string().min(1),
  request_id: z.string().min(1),
  payload: z.unknown(),
});
export type AdapterRequest = z.infer<typeof AdapterRequestSchema>;

export const TranscribePayloadSchema = z.object({ audio_b64: z.string() });
export const EmbedTextPayloadSchema = z.object({ text: z.string() });
export const EmbedAudioPayloadSchema = z.object({ audio_b64: z.string() });

export interface AdapterResponse {
  request_id: string;
  status: 'ok' | 'error';
  text?: string;
  vector?: number[];
  frames?: number[][];
  error_detail?: string;
}

export function okResponse(
  requestId: string,
  body: { text?: string; vector?: number[]; frames?: number[][] },
): AdapterResponse {
  const carried = [body.text, body.vector, body.frames].filter((v) => v !== undefined);
  if (carried.length !== 1) {
    throw new Error(`ok response must carry exactly one payload field, got ${carried.length}`);
  }
  return { request_id: requestId, status: 'ok', ...body };
}

export function errorResponse(requestId: string, detail: string): AdapterResponse {
  return { request_id: requestId, status: 'error', error_detail: detail };
}

function turnHasAudio(turn: Turn): boolean {
  return turn.audio_path !== undefined || turn.audio_b64 !== undefined;
}

/**
 * Reject context shapes that block-concatenate audio: no two
 * audio-bearing turns may be adjacent, and the sequence must end on the
 * test-query user turn. Violations are protocol errors raised before
 * any inference.
 */
export function assertInterleaved(turns: Turn[]): void {
  if (turns.length === 0) {
    throw new Error('context has no turns');
  }
  for (let i = 1; i < turns.length; i++) {
    if (turnHasAudio(turns[i - 1]) && turnHasAudio(turns[i])) {
      throw new Error('interleaving violation: adjacent audio turns');
    }
  }
  if (turns[turns.length - 1].role !== 'user') {
    throw new Error('interleaving violation: context must end with the test query user turn');
  }
}
