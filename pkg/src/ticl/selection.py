"""In-context example selection strategies.

All selectors exclude the test utterance by id: retrieving the test
item itself (with its ground-truth transcript) would leak labels
whenever candidate and test splits overlap. k=0 returns an empty
selection, so zero-shot flows through the same pipeline with no
special casing downstream.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .embedding import EmbeddingIndex, Neighbor, knn_query, l2_normalize
from .errors import SelectionFailed, ZeroVector
from .pool import CandidatePool

STRATEGY_TICL = "ticl"
STRATEGY_RANDOM = "random"
STRATEGY_AUDIO = "audio_embedding"
STRATEGY_SPEAKER = "speaker_embedding"

STRATEGIES = (STRATEGY_TICL, STRATEGY_RANDOM, STRATEGY_AUDIO, STRATEGY_SPEAKER)


@dataclass(frozen=True)
class PseudoLabel:
    """Possibly-erroneous transcription of a test utterance, used only as a query.

    text may be empty (a silent or failed transcription is representable);
    the producing model must always be named.
    """

    text: str
    source_model: str
    test_id: str

    def __post_init__(self):
        if not self.source_model:
            raise ValueError("pseudo-label needs a non-empty source_model")


@dataclass(frozen=True)
class SelectionTrace:
    query_text: str | None = None
    distances: tuple[float, ...] = ()
    embedding_family: str | None = None


@dataclass(frozen=True)
class SelectionResult:
    test_id: str
    strategy: str
    neighbors: tuple[Neighbor, ...]
    k_requested: int
    trace: SelectionTrace | None = None

    def neighbor_ids(self) -> list[str]:
        return [n.id for n in self.neighbors]


def select_ticl(
    pool: CandidatePool,
    index: EmbeddingIndex,
    pseudo_label: PseudoLabel,
    embed: Callable[[str], np.ndarray],
    k: int,
) -> SelectionResult:
    """Embed the pseudo-label and take the K nearest candidate transcripts.

    The embedder must be the same family that produced the index rows.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return SelectionResult(
            test_id=pseudo_label.test_id,
            strategy=STRATEGY_TICL,
            neighbors=(),
            k_requested=0,
            trace=SelectionTrace(query_text=pseudo_label.text),
        )
    try:
        query = l2_normalize(embed(pseudo_label.text))
        neighbors = knn_query(index, query, k, exclude_ids={pseudo_label.test_id})
    except ZeroVector as exc:
        raise SelectionFailed(pseudo_label.test_id, exc)
    return SelectionResult(
        test_id=pseudo_label.test_id,
        strategy=STRATEGY_TICL,
        neighbors=tuple(neighbors),
        k_requested=k,
        trace=SelectionTrace(
            query_text=pseudo_label.text,
            distances=tuple(n.distance for n in neighbors),
        ),
    )


def _derive_rng_seed(seed: int, test_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{test_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _sample_without_replacement(items: list, k: int, rng: random.Random) -> list:
    # Explicit partial Fisher-Yates so the draw sequence is pinned to the
    # Mersenne stream and stable across Python releases.
    pool = list(items)
    taken = []
    for _ in range(min(k, len(pool))):
        idx = rng.randrange(len(pool))
        taken.append(pool[idx])
        pool[idx] = pool[-1]
        pool.pop()
    return taken


def select_random(
    pool: CandidatePool,
    k: int,
    seed: int,
    exclude: Iterable[str] = (),
    test_id: str = "",
) -> SelectionResult:
    """Uniform sample without replacement; same (pool, k, seed, exclude) -> same output.

    k beyond the eligible pool size returns every eligible record in
    sampled order. Sampled neighbors carry distance 0.0 (no geometry).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    excluded = set(exclude) | ({test_id} if test_id else set())
    eligible = [r.id for r in pool if r.id not in excluded]
    rng = random.Random(_derive_rng_seed(seed, test_id))
    chosen = _sample_without_replacement(eligible, k, rng)
    neighbors = tuple(
        Neighbor(id=record_id, distance=0.0, rank=rank)
        for rank, record_id in enumerate(chosen, start=1)
    )
    return SelectionResult(
        test_id=test_id,
        strategy=STRATEGY_RANDOM,
        neighbors=neighbors,
        k_requested=k,
    )


def select_by_audio_embedding(
    pool: CandidatePool,
    audio_index: EmbeddingIndex,
    test_embedding: np.ndarray,
    k: int,
    exclude: Iterable[str] = (),
    test_id: str = "",
    embedding_family: str = "audio",
    strategy: str = STRATEGY_AUDIO,
) -> SelectionResult:
    """KNN over an audio- or speaker-embedding index (rows pre-pooled and normalized)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if strategy not in (STRATEGY_AUDIO, STRATEGY_SPEAKER):
        raise ValueError(f"strategy must be audio or speaker embedding, got {strategy!r}")
    if k == 0:
        return SelectionResult(
            test_id=test_id, strategy=strategy, neighbors=(), k_requested=0,
            trace=SelectionTrace(embedding_family=embedding_family),
        )
    excluded = set(exclude) | ({test_id} if test_id else set())
    try:
        query = l2_normalize(test_embedding)
        neighbors = knn_query(audio_index, query, k, exclude_ids=excluded)
    except ZeroVector as exc:
        raise SelectionFailed(test_id, exc)
    return SelectionResult(
        test_id=test_id,
        strategy=strategy,
        neighbors=tuple(neighbors),
        k_requested=k,
        trace=SelectionTrace(
            distances=tuple(n.distance for n in neighbors),
            embedding_family=embedding_family,
        ),
    )


def load_pseudo_labels(path: str | Path) -> dict[str, PseudoLabel]:
    """Read a JSONL pseudo-label file: {test_id, text, source_model} per line."""
    labels: dict[str, PseudoLabel] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            label = PseudoLabel(
                text=str(raw["text"]),
                source_model=str(raw["source_model"]),
                test_id=str(raw["test_id"]),
            )
            labels[label.test_id] = label
    return labels


def write_pseudo_labels(labels: Iterable[PseudoLabel], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps(
                {"test_id": label.test_id, "text": label.text, "source_model": label.source_model},
                ensure_ascii=False,
            ) + "\n")


def write_selections(selections: Iterable[SelectionResult], path: str | Path) -> None:
    """Selections file: one record per line with neighbors in rank order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for sel in selections:
            fh.write(json.dumps(
                {
                    "test_id": sel.test_id,
                    "strategy": sel.strategy,
                    "k": sel.k_requested,
                    "neighbors": [
                        {"id": n.id, "distance": n.distance} for n in sel.neighbors
                    ],
                },
                ensure_ascii=False,
            ) + "\n")


def load_selections(path: str | Path) -> list[SelectionResult]:
    out: list[SelectionResult] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            neighbors = tuple(
                Neighbor(id=str(n["id"]), distance=float(n["distance"]), rank=rank)
                for rank, n in enumerate(raw["neighbors"], start=1)
            )
            out.append(SelectionResult(
                test_id=str(raw["test_id"]),
                strategy=str(raw["strategy"]),
                neighbors=neighbors,
                k_requested=int(raw["k"]),
            ))
    return out
