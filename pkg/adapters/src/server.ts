/**
 * HTTP adapter service.
 *
 * Endpoints: /v1/transcribe, /v1/embed_text, /v1/embed_audio,
 * /v1/generate, /v1/health. Bodies follow the adapter protocol:
 * requests carry {kind, model_id, payload, request_id}; every response
 * echoes the request_id, and per-request failures come back as
 * status=error without taking the service down. Handlers share no
 * per-request state, so concurrent clients never cross-contaminate.
 */

import express, { Express, Request, Response } from 'express';
import type { Server } from 'node:http';

import {
  AdapterRequestSchema,
  EmbedAudioPayloadSchema,
  EmbedTextPayloadSchema,
  GeneratePayloadSchema,
  TranscribePayloadSchema,
  errorResponse,
  okResponse,
} from './protocol.js';
import { ModelRegistry } from './models.js';

type Handler = (registry: ModelRegistry, modelId: string, payload: unknown) => {
  text?: string;
  vector?: number[];
  frames?: number[][];
};

const handlers: Record<string, Handler> = {
  transcribe: (registry, modelId, payload) => {
    const parsed = TranscribePayloadSchema.parse(payload);
    const audio = Buffer.from(parsed.audio_b64, 'base64');
    return { text: registry.transcriber(modelId).transcribe(audio) };
  },
  embed_text: (registry, modelId, payload) => {
    const parsed = EmbedTextPayloadSchema.parse(payload);
    const vector = registry.textEmbedder(modelId).embed(parsed.text);
    return { vector: [...vector].map((v) => Math.fround(v)) };
  },
  embed_audio: (registry, modelId, payload) => {
    const parsed = EmbedAudioPayloadSchema.parse(payload);
    const audio = Buffer.from(parsed.audio_b64, 'base64');
    return { frames: registry.audioEmbedder(modelId).embedFrames(audio) };
  },
  generate: (registry, modelId, payload) => {
    const parsed = GeneratePayloadSchema.parse(payload);
    return { text: registry.generator(modelId).generate(parsed) };
  },
};

function endpoint(kind: keyof typeof handlers, registry: ModelRegistry) {
  return (req: Request, res: Response) => {
    const parsedRequest = AdapterRequestSchema.safeParse(req.body);
    if (!parsedRequest.success) {
      res.status(400).json(errorResponse(
        String((req.body as { request_id?: unknown })?.request_id ?? ''),
        `malformed request: ${parsedRequest.error.issues[0]?.message ?? 'invalid body'}`,
      ));
      return;
    }
    const { request_id: requestId, model_id: modelId, kind: bodyKind, payload } = parsedRequest.data;
    if (bodyKind !== kind) {
      res.status(400).json(errorResponse(requestId, `kind ${bodyKind} sent to /v1/${kind}`));
      return;
    }
    try {
      res.json(okResponse(requestId, handlers[kind](registry, modelId, payload)));
    } catch (error) {
      res.status(200).json(errorResponse(requestId, (error as Error).message));
    }
  };
}

export function createApp(registry: ModelRegistry): Express {
  const app = express();
  app.use(express.json({ limit: '64mb' }));

  for (const kind of Object.keys(handlers) as (keyof typeof handlers)[]) {
    app.post(`/v1/${kind}`, endpoint(kind, registry));
  }

  app.get('/v1/health', (_req, res) => {
    res.json({
      status: 'ok',
      models: registry.loadedModels(),
      capabilities: {
        // Dialogue contexts with one audio segment per user turn are
        // supported by every built-in generator; a model-specific
        // adapter may report false here instead of guessing.
        multi_audio_turns: true,
      },
    });
  });

  return app;
}

export function serve(registry: ModelRegistry, port: number, host = '127.0.0.1'): Promise<Server> {
  const app = createApp(registry);
  return new Promise((resolve) => {
    const server = app.listen(port, host, () => resolve(server));
  });
}
