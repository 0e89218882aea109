/**
 * Model registry.
 *
 * The registry resolves model ids to handles per request kind. The
 * built-in models are deterministic, dependency-free stand-ins meant
 * for pipeline plumbing and tests; wiring a real ASR / sentence encoder
 * / LMM means registering a handle with the same interface (the service
 * and batch CLI never care what sits behind it).
 */

import { GeneratePayload, Turn, assertInterleaved } from './protocol.js';
import { HASH_NGRAM_DIM, audioFrames, decodeAudioAsText, embedTextTrigram } from './hash.js';

export class ModelLoadError extends Error {}
export class ContextTooLongError extends Error {}

export interface TextEmbedModel {
  readonly id: string;
  readonly dim: number;
  embed(text: string): Float64Array;
}

export interface AudioEmbedModel {
  readonly id: string;
  readonly frameDim: number;
  embedFrames(audio: Buffer): number[][];
}

export interface TranscribeModel {
  readonly id: string;
  transcribe(audio: Buffer): string;
}

export interface GenerateModel {
  readonly id: string;
  readonly maxTurns: number;
  generate(payload: GeneratePayload): string;
}

class HashTrigramEmbedder implements TextEmbedModel {
  constructor(readonly id: string, readonly dim: number = HASH_NGRAM_DIM) {}

  embed(text: string): Float64Array {
    return embedTextTrigram(text, this.dim);
  }
}

class FrameHashAudioEmbedder implements AudioEmbedModel {
  readonly frameDim = 8;

  constructor(readonly id: string) {}

  embedFrames(audio: Buffer): number[][] {
    return audioFrames(audio, this.frameDim);
  }
}

class Utf8EchoTranscriber implements TranscribeModel {
  constructor(readonly id: string) {}

  transcribe(audio: Buffer): string {
    // Text-as-audio fixtures echo back; real (binary) audio yields "".
    return decodeAudioAsText(audio);
  }
}

class EchoNearestGenerator implements GenerateModel {
  constructor(readonly id: string, readonly maxTurns: number) {}

  generate(payload: GeneratePayload): string {
    const turns = payload.turns as Turn[];
    assertInterleaved(turns);
    if (turns.length > this.maxTurns) {
      throw new ContextTooLongError(
        `context has ${turns.length} turns; ${this.id} accepts at most ${this.maxTurns}`,
      );
    }
    const assistantTexts = turns.filter((t) => t.role === 'assistant').map((t) => t.text);
    if (assistantTexts.length === 0) {
      return '';
    }
    const orderPolicy = (payload.metadata?.order_policy as string | undefined) ?? 'nearest_last';
    return orderPolicy === 'nearest_last'
      ? assistantTexts[assistantTexts.length - 1]
      : assistantTexts[0];
  }
}

export class ModelRegistry {
  private textEmbedders = new Map<string, TextEmbedModel>();
  private audioEmbedders = new Map<string, AudioEmbedModel>();
  private transcribers = new Map<string, TranscribeModel>();
  private generators = new Map<string, GenerateModel>();

  registerTextEmbedder(model: TextEmbedModel): void {
    this.textEmbedders.set(model.id, model);
  }

  registerAudioEmbedder(model: AudioEmbedModel): void {
    this.audioEmbedders.set(model.id, model);
  }

  registerTranscriber(model: TranscribeModel): void {
    this.transcribers.set(model.id, model);
  }

  registerGenerator(model: GenerateModel): void {
    this.generators.set(model.id, model);
  }

  textEmbedder(id: string): TextEmbedModel {
    const model = this.textEmbedders.get(id);
    if (!model) throw new ModelLoadError(`unknown model: ${id}`);
    return model;
  }

  audioEmbedder(id: string): AudioEmbedModel {
    const model = this.audioEmbedders.get(id);
    if (!model) throw new ModelLoadError(`unknown model: ${id}`);
    return model;
  }

  transcriber(id: string): TranscribeModel {
    const model = this.transcribers.get(id);
    if (!model) throw new ModelLoadError(`unknown model: ${id}`);
    return model;
  }

  generator(id: string): GenerateModel {
    const model = this.generators.get(id);
    if (!model) throw new ModelLoadError(`unknown model: ${id}`);
    return model;
  }

  loadedModels(): Record<string, string[]> {
    return {
      transcribe: [...this.transcribers.keys()].sort(),
      embed_text: [...this.textEmbedders.keys()].sort(),
      embed_audio: [...this.audioEmbedders.keys()].sort(),
      generate: [...this.generators.keys()].sort(),
    };
  }
}

export function defaultRegistry(): ModelRegistry {
  const registry = new ModelRegistry();
  // Same id as the toolkit's built-in query embedder: files written by
  // batch embed are directly index- and query-compatible with it.
  registry.registerTextEmbedder(new HashTrigramEmbedder('hash-ngram'));
  registry.registerAudioEmbedder(new FrameHashAudioEmbedder('frame-hash'));
  registry.registerTranscriber(new Utf8EchoTranscriber('utf8-echo'));
  registry.registerGenerator(new EchoNearestGenerator('echo-nearest', 64));
  // Deliberately tiny context window; oversized contexts must surface
  // ContextTooLong instead of being truncated silently.
  registry.registerGenerator(new EchoNearestGenerator('echo-nearest-small', 9));
  return registry;
}
