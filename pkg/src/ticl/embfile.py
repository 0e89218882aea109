"""Binary embedding file reader/writer.

Layout (little-endian): 8-byte magic "TICLEMB1", u32 dim, u64 count,
then count rows of dim float32 values, row-major. Row ids live in a
sidecar text file at "<path>.ids", one line per row, line i <-> row i.
A sidecar line may carry a tab-separated "!failed" flag marking a
sentinel (all-zero) row written by a batch embedder that could not
process that record.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmbeddingFileError

MAGIC = b"TICLEMB1"
_HEADER = struct.Struct("<8sIQ")

FAILED_FLAG = "!failed"


def sidecar_path(emb_path: str | Path) -> Path:
    return Path(str(emb_path) + ".ids")


@dataclass(frozen=True)
class EmbeddingFile:
    ids: tuple[str, ...]
    matrix: np.ndarray  # float32, shape (count, dim)
    failed_ids: frozenset[str] = frozenset()

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def count(self) -> int:
        return int(self.matrix.shape[0])


def write_embedding_file(path: str | Path, ids: list[str], matrix: np.ndarray,
                         failed_ids: set[str] | frozenset[str] = frozenset()) -> None:
    """Write rows as float32 plus the id sidecar; overwrites idempotently."""
    arr = np.asarray(matrix, dtype=np.float32)
    if arr.ndim != 2:
        raise EmbeddingFileError(f"matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] != len(ids):
        raise EmbeddingFileError(f"{len(ids)} ids but {arr.shape[0]} rows")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.shape[1], arr.shape[0]))
        fh.write(np.ascontiguousarray(arr).tobytes())
    with sidecar_path(path).open("w", encoding="utf-8") as fh:
        for record_id in ids:
            flag = f"\t{FAILED_FLAG}" if record_id in failed_ids else ""
            fh.write(f"{record_id}{flag}\n")


def read_embedding_file(path: str | Path) -> EmbeddingFile:
    """Read a binary embedding file and its id sidecar."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFileError(f"{path}: truncated header")
    magic, dim, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic {magic!r}")
    if dim == 0:
        raise EmbeddingFileError(f"{path}: dim must be positive")
    expected = _HEADER.size + 4 * dim * count
    if len(raw) != expected:
        raise EmbeddingFileError(f"{path}: expected {expected} bytes, found {len(raw)}")
    matrix = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)

    side = sidecar_path(path)
    if not side.exists():
        raise EmbeddingFileError(f"missing id sidecar {side}")
    ids: list[str] = []
    failed: set[str] = set()
    with side.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            ids.append(parts[0])
            if FAILED_FLAG in parts[1:]:
                failed.add(parts[0])
    if len(ids) != count:
        raise EmbeddingFileError(f"{side}: {len(ids)} ids for {count} rows")
    return EmbeddingFile(ids=tuple(ids), matrix=matrix, failed_ids=frozenset(failed))
