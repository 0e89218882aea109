"""Shared fixtures: manifest writers and synthetic twin corpora.

The twin corpus is the workhorse for end-to-end tests: every test
utterance has an exact-transcript twin in the candidate pool, so with
the echo-nearest mock the expected corpus error rates are derivable by
construction.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def make_vocabulary(n_words: int, seed: int = 7) -> list[str]:
    """Deterministic pseudo-words, pairwise distinct, 2-3 syllables."""
    rng = random.Random(seed)
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n_words:
        word = "".join(rng.choice(syllables) for _ in range(rng.choice((2, 3))))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def write_manifest(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def manifest_row(record_id: str, transcript: str, split: str = "train",
                 duration: float = 3.0, language: str = "en", **extra) -> dict:
    row = {
        "id": record_id,
        "audio_path": f"audio/{record_id}.wav",
        "transcript": transcript,
        "duration_s": duration,
        "language": language,
        "split": split,
    }
    row.update(extra)
    return row


def make_twin_corpus(
    tmp_dir: Path,
    n_test: int = 20,
    n_pool: int = 50,
    words_per_utt: int = 8,
    seed: int = 1234,
) -> dict:
    """Build test + candidate manifests where each test item has an exact twin.

    Returns a dict with manifest paths, transcripts per test id, and the
    flat list of reference words (for noise injection bookkeeping).
    """
    assert n_pool >= n_test
    vocab = make_vocabulary(n_test * words_per_utt + (n_pool - n_test) * words_per_utt, seed=seed)
    cursor = 0

    def take(n: int) -> list[str]:
        nonlocal cursor
        chunk = vocab[cursor:cursor + n]
        cursor += n
        return chunk

    test_rows, pool_rows, transcripts = [], [], {}
    for i in range(n_test):
        text = " ".join(take(words_per_utt))
        test_id = f"t{i:03d}"
        transcripts[test_id] = text
        test_rows.append(manifest_row(test_id, text, split="test"))
        pool_rows.append(manifest_row(f"c{i:03d}", text, split="train"))
    for j in range(n_pool - n_test):
        pool_rows.append(manifest_row(f"d{j:03d}", " ".join(take(words_per_utt)), split="train"))

    return {
        "test_manifest": write_manifest(tmp_dir / "test.jsonl", test_rows),
        "pool_manifest": write_manifest(tmp_dir / "pool.jsonl", pool_rows),
        "transcripts": transcripts,
        "vocabulary": vocab[:cursor],
    }


def make_confusable_corpus(
    tmp_dir: Path,
    n_test: int = 20,
    words_per_utt: int = 6,
    n_unrelated: int = 10,
    seed: int = 1,
) -> dict:
    """Twin corpus plus 'sibling' distractors sharing half of each item's words.

    Siblings make retrieval genuinely lose when pseudo-labels are noisy
    enough, so quality-vs-accuracy trends carry real signal instead of
    being uniformly zero.
    """
    vocab = make_vocabulary(n_test * words_per_utt * 2 + n_unrelated * words_per_utt, seed=seed)
    cursor = 0

    def take(n: int) -> list[str]:
        nonlocal cursor
        chunk = vocab[cursor:cursor + n]
        cursor += n
        return chunk

    test_rows, pool_rows, transcripts = [], [], {}
    half = words_per_utt // 2
    for i in range(n_test):
        words = take(words_per_utt)
        text = " ".join(words)
        test_id = f"t{i:03d}"
        transcripts[test_id] = text
        test_rows.append(manifest_row(test_id, text, split="test"))
        pool_rows.append(manifest_row(f"c{i:03d}", text, split="train"))
        sibling = " ".join(words[:half] + take(words_per_utt - half))
        pool_rows.append(manifest_row(f"s{i:03d}", sibling, split="train"))
    for j in range(n_unrelated):
        pool_rows.append(manifest_row(f"d{j:03d}", " ".join(take(words_per_utt)), split="train"))

    return {
        "test_manifest": write_manifest(tmp_dir / "test.jsonl", test_rows),
        "pool_manifest": write_manifest(tmp_dir / "pool.jsonl", pool_rows),
        "transcripts": transcripts,
        "vocabulary": vocab[:cursor],
    }


def inject_word_noise(
    transcripts: dict[str, str],
    target_rate: float,
    seed: int,
    replacement_vocab: list[str] | None = None,
) -> tuple[dict[str, str], float]:
    """Substitute words to hit an exact corpus-level WER.

    Substitutions land on globally sampled positions; replacements are
    unique junk tokens unless a vocabulary is supplied. Returns the
    noisy texts and the exact injected rate.
    """
    rng = random.Random(seed)
    ordered = sorted(transcripts)
    tokenized = {tid: transcripts[tid].split() for tid in ordered}
    positions = [(tid, idx) for tid in ordered for idx in range(len(tokenized[tid]))]
    total = len(positions)
    n_sub = round(target_rate * total)
    chosen = sorted(rng.sample(range(total), n_sub))
    for serial, flat_idx in enumerate(chosen):
        tid, idx = positions[flat_idx]
        original = tokenized[tid][idx]
        if replacement_vocab:
            candidates = [w for w in replacement_vocab if w != original]
            replacement = rng.choice(candidates)
        else:
            replacement = f"zzq{serial}"
        tokenized[tid][idx] = replacement
    noisy = {tid: " ".join(tokens) for tid, tokens in tokenized.items()}
    return noisy, n_sub / total


def write_pseudo_label_file(path: Path, texts: dict[str, str], source_model: str) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for test_id in sorted(texts):
            fh.write(json.dumps(
                {"test_id": test_id, "text": texts[test_id], "source_model": source_model},
                ensure_ascii=False,
            ) + "\n")
    return path


def write_experiment_config(
    path: Path,
    pool_manifest: Path,
    test_manifest: Path,
    pseudo_label_file: Path,
    k_values: str = "0,1,4",
    seed: int = 77,
    strategy_kind: str = "ticl",
    labeler: str = "synthetic",
    extra_experiment: dict | None = None,
) -> Path:
    lines = [
        "[experiment]",
        "name = twin-toy",
        f"pool_manifest = {pool_manifest}",
        f"test_manifest = {test_manifest}",
        f"k_values = {k_values}",
        f"seed = {seed}",
    ]
    for key, value in (extra_experiment or {}).items():
        lines.append(f"{key} = {value}")
    lines += [
        "",
        "[strategy]",
        f"kind = {strategy_kind}",
        "embedder = hash-ngram",
        "",
        "[pseudo_labels]",
        f"labeler = {labeler}",
        f"file = {pseudo_label_file}",
        "",
        "[backend]",
        "kind = mock:echo-nearest",
        "max_in_flight = 4",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_pool_rows() -> list[dict]:
    return [
        manifest_row("u1", "the cat sat on the mat", duration=2.0),
        manifest_row("u2", "a dog ran through the park", duration=4.5),
        manifest_row("u3", "birds sing in the morning", duration=1.0),
    ]
