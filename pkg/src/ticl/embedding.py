"""Unit-norm embedding space with exact K-nearest-neighbor queries.

The index is flat and exhaustive: every query scans all rows, which
keeps results exact and deterministic for pools that fit in memory.
Rows are stored as float32; distances are always computed in float64
so tie detection does not depend on storage precision. Ties on
distance are broken by ascending id.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .embfile import read_embedding_file, write_embedding_file
from .errors import (
    DimensionMismatch,
    EmbeddingFileError,
    EmptyIndex,
    EmptySequence,
    MissingEmbedding,
    ZeroVector,
)
from .pool import CandidatePool

# A unit vector may drift from norm 1 by this much (float32 storage).
UNIT_NORM_TOL = 1e-6

_ZERO_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class Neighbor:
    """One retrieved candidate: Euclidean distance to the query plus 1-based rank."""

    id: str
    distance: float
    rank: int


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm (float64 output)."""
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ZeroVector()
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite components")
    norm = float(np.linalg.norm(arr))
    if norm <= _ZERO_NORM_FLOOR:
        raise ZeroVector()
    return arr / norm


def pool_temporal(frames: np.ndarray, method: str = "mean_std") -> np.ndarray:
    """Collapse a T x d frame matrix to a fixed-length vector.

    "mean" gives per-dimension means (d values); "mean_std" appends the
    per-dimension population standard deviations (2d values).
    """
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptySequence(f"need a non-empty T x d matrix, got shape {arr.shape}")
    means = arr.mean(axis=0)
    if method == "mean":
        return means
    if method == "mean_std":
        return np.concatenate([means, arr.std(axis=0)])
    raise ValueError(f"unknown pooling method {method!r}")


class EmbeddingIndex:
    """Id-aligned matrix of unit-norm rows; immutable after construction."""

    def __init__(self, ids: Iterable[str], matrix: np.ndarray):
        self.ids: tuple[str, ...] = tuple(ids)
        arr = np.asarray(matrix, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != len(self.ids):
            raise ValueError(f"{len(self.ids)} ids but {arr.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")
        norms = np.linalg.norm(arr.astype(np.float64), axis=1)
        if arr.shape[0] and np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("index rows must be unit-norm")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        self.matrix = arr
        self._row_of = {record_id: i for i, record_id in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, record_id: str) -> np.ndarray:
        return self.matrix[self._row_of[record_id]]

    def save(self, path: str | Path) -> None:
        write_embedding_file(path, list(self.ids), self.matrix)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingIndex":
        emb = read_embedding_file(path)
        if emb.failed_ids:
            raise EmbeddingFileError(
                f"{path}: {len(emb.failed_ids)} rows flagged failed; cannot serve as an index"
            )
        return cls(emb.ids, emb.matrix)


def build_index(pool: CandidatePool, embeddings: Mapping[str, np.ndarray]) -> EmbeddingIndex:
    """Normalize one embedding per pool record into an index, in pool order."""
    dim: int | None = None
    rows: list[np.ndarray] = []
    ids: list[str] = []
    for record in pool:
        if record.id not in embeddings:
            raise MissingEmbedding(record.id)
        vec = np.asarray(embeddings[record.id], dtype=np.float64).reshape(-1)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DimensionMismatch(dim, vec.size, record.id)
        try:
            unit = l2_normalize(vec)
        except ZeroVector:
            raise ZeroVector(record.id)
        rows.append(unit.astype(np.float32))
        ids.append(record.id)
    matrix = np.stack(rows) if rows else np.zeros((0, dim or 0), dtype=np.float32)
    return EmbeddingIndex(ids, matrix)


def knn_query(
    index: EmbeddingIndex,
    query: np.ndarray,
    k: int,
    exclude_ids: Iterable[str] = (),
) -> list[Neighbor]:
    """Exact K nearest rows by Euclidean distance, ties broken by ascending id.

    Returns min(k, eligible) neighbors; raises EmptyIndex when exclusion
    leaves no eligible candidate.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.size != index.dim:
        raise DimensionMismatch(index.dim, q.size)
    excluded = set(exclude_ids)
    eligible = [i for i, record_id in enumerate(index.ids) if record_id not in excluded]
    if not eligible:
        raise EmptyIndex("no eligible candidates after exclusion")

    rows = index.matrix[eligible].astype(np.float64)
    diffs = rows - q
    distances = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    order = sorted(range(len(eligible)), key=lambda j: (distances[j], index.ids[eligible[j]]))
    top = order[: min(k, len(order))]
    return [
        Neighbor(id=index.ids[eligible[j]], distance=float(distances[j]), rank=rank)
        for rank, j in enumerate(top, start=1)
    ]
