"""Text embedders for retrieval queries and index construction.

The hash-ngram embedder is a deterministic, dependency-free stand-in
that makes selection exercisable offline: character trigrams are hashed
into a fixed number of signed buckets. It is not a quality substitute
for a neural sentence encoder; it exists so pipelines and tests run
without any model. Real encoders are reached over the adapter HTTP
protocol.
"""

from __future__ import annotations

import hashlib

import numpy as np

HASH_NGRAM_ID = "hash-ngram"
HASH_NGRAM_DIM = 64


def hash_ngram_embed(text: str, dim: int = HASH_NGRAM_DIM) -> np.ndarray:
    """Character-trigram hashing into signed buckets; zeros for blank text."""
    vec = np.zeros(dim, dtype=np.float64)
    stripped = text.strip()
    if not stripped:
        return vec
    padded = f" {stripped.lower()} "
    for i in range(len(padded) - 2):
        digest = hashlib.sha256(padded[i:i + 3].encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[bucket] += sign
    return vec


class HashNgramEmbedder:
    """Callable wrapper so the embedder can stand where adapters do."""

    model_id = HASH_NGRAM_ID
    dim = HASH_NGRAM_DIM

    def __call__(self, text: str) -> np.ndarray:
        return hash_ngram_embed(text, self.dim)


class AdapterTextEmbedder:
    """Text embedder backed by an adapter service's embed_text endpoint."""

    def __init__(self, base_url: str, model_id: str, timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.timeout_s = timeout_s
        self._counter = 0

    def __call__(self, text: str) -> np.ndarray:
        # Imported lazily so offline runs never touch the HTTP stack.
        from .backends import post_adapter_request

        self._counter += 1
        response = post_adapter_request(
            f"{self.base_url}/v1/embed_text",
            {
                "kind": "embed_text",
                "model_id": self.model_id,
                "payload": {"text": text},
                "request_id": f"embed-{self._counter}",
            },
            timeout_s=self.timeout_s,
        )
        return np.asarray(response["vector"], dtype=np.float64)


def make_embedder(spec: str, adapter_url: str | None = None):
    """Resolve an embedder spec: "hash-ngram" or an adapter model id."""
    if spec == HASH_NGRAM_ID:
        return HashNgramEmbedder()
    if adapter_url is None:
        raise ValueError(f"embedder {spec!r} needs an adapter URL")
    return AdapterTextEmbedder(adapter_url, spec)
