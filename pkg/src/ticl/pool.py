"""Candidate and test utterance pools loaded from JSONL manifests.

A manifest is UTF-8, one JSON object per line, with fields
{id, audio_path, transcript, duration_s, language, split, speaker_id?}.
Transcripts are stored verbatim; text normalization happens only in
scoring so the same pool serves prompting and metrics. Audio files are
referenced by path and never opened here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

from .errors import DuplicateId, InvalidRange, MalformedManifest, MissingField

SPLITS = ("train", "validation", "test", "validated")

# Splits whose records may serve as in-context candidates and therefore
# must carry a usable transcript.
CANDIDATE_SPLITS = ("train", "validation", "validated")

_REQUIRED_FIELDS = ("id", "audio_path", "transcript", "duration_s", "language", "split")


@dataclass(frozen=True)
class UtteranceRecord:
    """One (audio, transcript) item; a retrieval candidate or a test query."""

    id: str
    audio_path: str
    transcript: str
    duration_s: float
    language: str
    split: str
    speaker_id: str | None = None


@dataclass(frozen=True)
class CandidatePool:
    """Immutable, ordered collection of utterance records."""

    records: tuple[UtteranceRecord, ...]
    source_manifest: str = ""
    filter_provenance: str = "unfiltered"

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[UtteranceRecord]:
        return iter(self.records)

    def get(self, record_id: str) -> UtteranceRecord | None:
        return self._by_id().get(record_id)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def _by_id(self) -> dict[str, UtteranceRecord]:
        # Built lazily; frozen dataclass, so cache via object.__setattr__.
        cache = getattr(self, "_id_cache", None)
        if cache is None:
            cache = {r.id: r for r in self.records}
            object.__setattr__(self, "_id_cache", cache)
        return cache


def _parse_record(raw: dict, line_no: int) -> UtteranceRecord:
    for name in _REQUIRED_FIELDS:
        if name not in raw:
            raise MissingField(name, line_no)

    record_id = str(raw["id"])
    if not record_id:
        raise MalformedManifest(line_no, "empty id")

    try:
        duration = float(raw["duration_s"])
    except (TypeError, ValueError):
        raise MalformedManifest(line_no, f"duration_s not a number: {raw['duration_s']!r}")
    if not duration > 0:
        raise MalformedManifest(line_no, f"duration_s must be > 0, got {duration}")

    split = str(raw["split"])
    if split not in SPLITS:
        raise MalformedManifest(line_no, f"unknown split {split!r} (expected one of {SPLITS})")

    transcript = str(raw["transcript"])
    if split in CANDIDATE_SPLITS and not transcript.strip():
        raise MalformedManifest(line_no, f"empty transcript for candidate-split record {record_id!r}")

    speaker = raw.get("speaker_id")
    return UtteranceRecord(
        id=record_id,
        audio_path=str(raw["audio_path"]),
        transcript=transcript,
        duration_s=duration,
        language=str(raw["language"]),
        split=split,
        speaker_id=None if speaker is None else str(speaker),
    )


def load_pool(manifest_path: str | Path) -> CandidatePool:
    """Parse a JSONL manifest into a pool, preserving line order.

    Raises MalformedManifest, MissingField, or DuplicateId on bad input.
    """
    path = Path(manifest_path)
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedManifest(line_no, f"invalid JSON ({exc.msg})")
            if not isinstance(raw, dict):
                raise MalformedManifest(line_no, "record is not an object")
            record = _parse_record(raw, line_no)
            if record.id in seen:
                raise DuplicateId(record.id)
            seen.add(record.id)
            records.append(record)
    return CandidatePool(records=tuple(records), source_manifest=str(path))


def save_pool(pool: CandidatePool, out_path: str | Path) -> None:
    """Write a pool back to manifest form; transcripts round-trip byte-identically."""
    path = Path(out_path)
    with path.open("w", encoding="utf-8") as fh:
        for r in pool.records:
            row = {
                "id": r.id,
                "audio_path": r.audio_path,
                "transcript": r.transcript,
                "duration_s": r.duration_s,
                "language": r.language,
                "split": r.split,
            }
            if r.speaker_id is not None:
                row["speaker_id"] = r.speaker_id
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def filter_duration(pool: CandidatePool, min_s: float, max_s: float) -> CandidatePool:
    """Keep records with min_s <= duration_s <= max_s (both bounds inclusive)."""
    if min_s <= 0 or min_s >= max_s:
        raise InvalidRange(f"need 0 < min_s < max_s, got min_s={min_s}, max_s={max_s}")
    kept = tuple(r for r in pool.records if min_s <= r.duration_s <= max_s)
    provenance = f"duration in [{min_s:g}, {max_s:g}] s, bounds inclusive"
    if pool.filter_provenance not in ("", "unfiltered"):
        provenance = f"{pool.filter_provenance}; {provenance}"
    return replace(pool, records=kept, filter_provenance=provenance)
