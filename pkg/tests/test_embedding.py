from __future__ import annotations

import math
import random

import numpy as np
import pytest

from ticl.embedding import EmbeddingIndex, build_index, knn_query, l2_normalize, pool_temporal
from ticl.embfile import read_embedding_file, write_embedding_file
from ticl.errors import (
    DimensionMismatch,
    EmbeddingFileError,
    EmptyIndex,
    EmptySequence,
    MissingEmbedding,
    ZeroVector,
)
from ticl.pool import load_pool

from conftest import manifest_row, write_manifest


def brute_force_knn(ids, matrix, query, k, exclude=()):
    """Independent oracle: pure-python distances over every row, full sort."""
    excluded = set(exclude)
    scored = []
    for row_idx, record_id in enumerate(ids):
        if record_id in excluded:
            continue
        total = 0.0
        for a, b in zip(matrix[row_idx], query):
            diff = float(a) - float(b)
            total += diff * diff
        scored.append((math.sqrt(total), record_id))
    scored.sort()
    return scored[:k]


# ---- l2_normalize -------------------------------------------------------

def test_normalize_3_4_5_triangle():
    out = l2_normalize(np.array([3.0, 4.0]))
    assert np.allclose(out, [0.6, 0.8])


def test_normalize_unit_vector_is_identity():
    out = l2_normalize(np.array([1.0, 0.0, 0.0]))
    assert np.allclose(out, [1.0, 0.0, 0.0])


def test_normalize_zero_vector_raises():
    with pytest.raises(ZeroVector):
        l2_normalize(np.zeros(2))


def test_normalize_norms_within_tolerance():
    rng = np.random.default_rng(42)
    vectors = rng.normal(size=(500, 24)) * rng.uniform(0.01, 100, size=(500, 1))
    for v in vectors:
        assert abs(np.linalg.norm(l2_normalize(v)) - 1.0) <= 1e-6


# ---- pool_temporal ------------------------------------------------------

def test_pool_mean():
    out = pool_temporal(np.array([[1.0, 2.0], [3.0, 4.0]]), "mean")
    assert np.allclose(out, [2.0, 3.0])


def test_pool_mean_std_uses_population_std():
    out = pool_temporal(np.array([[1.0, 2.0], [3.0, 4.0]]), "mean_std")
    assert np.allclose(out, [2.0, 3.0, 1.0, 1.0])


def test_pool_single_frame_zero_variance():
    out = pool_temporal(np.array([[5.0]]), "mean_std")
    assert np.allclose(out, [5.0, 0.0])


def test_pool_empty_sequence_raises():
    with pytest.raises(EmptySequence):
        pool_temporal(np.zeros((0, 4)))


# ---- build_index --------------------------------------------------------

def _pool_of(tmp_path, n):
    rows = [manifest_row(f"u{i}", f"text number {i}") for i in range(n)]
    return load_pool(write_manifest(tmp_path / "pool.jsonl", rows))


def test_build_index_normalizes_rows(tmp_path):
    pool = _pool_of(tmp_path, 2)
    index = build_index(pool, {"u0": np.array([3.0, 4.0]), "u1": np.array([0.0, 2.0])})
    assert np.allclose(index.matrix, [[0.6, 0.8], [0.0, 1.0]], atol=1e-7)
    assert index.ids == ("u0", "u1")


def test_build_index_single_high_dim(tmp_path):
    pool = _pool_of(tmp_path, 1)
    index = build_index(pool, {"u0": np.ones(768)})
    assert len(index) == 1 and index.dim == 768


def test_build_index_dimension_mismatch(tmp_path):
    pool = _pool_of(tmp_path, 2)
    with pytest.raises(DimensionMismatch):
        build_index(pool, {"u0": np.ones(768), "u1": np.ones(512)})


def test_build_index_missing_embedding(tmp_path):
    pool = _pool_of(tmp_path, 2)
    with pytest.raises(MissingEmbedding):
        build_index(pool, {"u0": np.ones(4)})


def test_build_index_zero_vector_names_id(tmp_path):
    pool = _pool_of(tmp_path, 2)
    with pytest.raises(ZeroVector) as excinfo:
        build_index(pool, {"u0": np.ones(4), "u1": np.zeros(4)})
    assert excinfo.value.record_id == "u1"


# ---- knn_query ----------------------------------------------------------

def _toy_index():
    return EmbeddingIndex(
        ["a", "b", "c"],
        np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], dtype=np.float32),
    )


def test_knn_basic_ordering():
    neighbors = knn_query(_toy_index(), np.array([1.0, 0.0]), k=2)
    assert [n.id for n in neighbors] == ["a", "b"]
    assert neighbors[0].distance == pytest.approx(0.0, abs=1e-9)
    assert neighbors[1].distance == pytest.approx(math.sqrt(2.0), abs=1e-9)
    assert [n.rank for n in neighbors] == [1, 2]


def test_knn_exclusion():
    neighbors = knn_query(_toy_index(), np.array([1.0, 0.0]), k=1, exclude_ids={"a"})
    assert neighbors[0].id == "b"


def test_knn_k_clamped_to_pool():
    assert len(knn_query(_toy_index(), np.array([1.0, 0.0]), k=5)) == 3


def test_knn_all_excluded_raises():
    with pytest.raises(EmptyIndex):
        knn_query(_toy_index(), np.array([1.0, 0.0]), k=1, exclude_ids={"a", "b", "c"})


def test_knn_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        knn_query(_toy_index(), np.array([1.0, 0.0, 0.0]), k=1)


def test_knn_self_retrieval():
    rng = np.random.default_rng(3)
    matrix = np.stack([l2_normalize(v) for v in rng.normal(size=(20, 8))]).astype(np.float32)
    index = EmbeddingIndex([f"r{i}" for i in range(20)], matrix)
    for i in (0, 7, 19):
        top = knn_query(index, index.matrix[i], k=1)[0]
        assert top.id == f"r{i}"
        assert top.distance <= 1e-6


def test_knn_matches_bruteforce_oracle_randomized():
    rng = np.random.default_rng(2024)
    py_rng = random.Random(2024)
    for trial in range(200):
        n = py_rng.randint(1, 200)
        d = py_rng.randint(2, 16)
        k = py_rng.randint(1, 10)
        base = rng.normal(size=(n, d))
        # A third of trials duplicate rows to force exact distance ties.
        if trial % 3 == 0 and n >= 2:
            for _ in range(py_rng.randint(1, max(1, n // 4))):
                base[py_rng.randrange(n)] = base[py_rng.randrange(n)]
        matrix = np.stack([l2_normalize(v) for v in base]).astype(np.float32)
        ids = [f"v{i:03d}" for i in range(n)]
        index = EmbeddingIndex(ids, matrix)
        query = l2_normalize(rng.normal(size=d))
        exclude = set(py_rng.sample(ids, py_rng.randint(0, min(3, n - 1)))) if n > 1 else set()

        got = knn_query(index, query, k, exclude_ids=exclude)
        want = brute_force_knn(ids, matrix, query, k, exclude)
        assert [n_.id for n_ in got] == [record_id for _, record_id in want]
        assert np.allclose([n_.distance for n_ in got], [dist for dist, _ in want], atol=1e-9)


def test_knn_euclidean_cosine_identity():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = l2_normalize(rng.normal(size=12))
        b = l2_normalize(rng.normal(size=12))
        r_squared = float(np.sum((a - b) ** 2))
        cosine = float(np.dot(a, b))
        assert abs(r_squared - (2.0 - 2.0 * cosine)) <= 1e-6


def test_distance_ranking_equals_descending_cosine_ranking():
    rng = np.random.default_rng(17)
    for _ in range(50):
        matrix = np.stack([l2_normalize(v) for v in rng.normal(size=(40, 10))]).astype(np.float32)
        index = EmbeddingIndex([f"x{i:02d}" for i in range(40)], matrix)
        query = l2_normalize(rng.normal(size=10))
        by_distance = [n.id for n in knn_query(index, query, 40)]
        cosines = matrix.astype(np.float64) @ query
        by_cosine = [f"x{i:02d}" for i in np.argsort(-cosines, kind="stable")]
        assert by_distance == by_cosine


def test_knn_permutation_invariant():
    rng = np.random.default_rng(11)
    base = np.stack([l2_normalize(v) for v in rng.normal(size=(30, 6))]).astype(np.float32)
    base[7] = base[3]  # exact duplicate, resolved by id
    ids = [f"n{i:02d}" for i in range(30)]
    query = l2_normalize(rng.normal(size=6))
    forward = knn_query(EmbeddingIndex(ids, base), query, 10)
    perm = list(range(30))
    random.Random(1).shuffle(perm)
    shuffled = knn_query(EmbeddingIndex([ids[i] for i in perm], base[perm]), query, 10)
    assert [n.id for n in forward] == [n.id for n in shuffled]


def test_neighbor_distance_bounded_for_unit_vectors():
    rng = np.random.default_rng(13)
    matrix = np.stack([l2_normalize(v) for v in rng.normal(size=(50, 4))]).astype(np.float32)
    index = EmbeddingIndex([str(i) for i in range(50)], matrix)
    neighbors = knn_query(index, l2_normalize(rng.normal(size=4)), k=50)
    assert all(0.0 <= n.distance <= 2.0 + 1e-6 for n in neighbors)


def test_knn_k_must_be_positive():
    with pytest.raises(ValueError):
        knn_query(_toy_index(), np.array([1.0, 0.0]), k=0)


# ---- binary embedding file ----------------------------------------------

def test_embedding_file_round_trip(tmp_path):
    matrix = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
    path = tmp_path / "vectors.emb"
    write_embedding_file(path, ["a", "b", "c"], matrix)
    loaded = read_embedding_file(path)
    assert loaded.ids == ("a", "b", "c")
    assert loaded.dim == 4 and loaded.count == 3
    assert np.array_equal(loaded.matrix, matrix)


def test_embedding_file_header_layout(tmp_path):
    path = tmp_path / "one.emb"
    write_embedding_file(path, ["x"], np.ones((1, 2), dtype=np.float32))
    raw = path.read_bytes()
    assert raw[:8] == b"TICLEMB1"
    assert int.from_bytes(raw[8:12], "little") == 2
    assert int.from_bytes(raw[12:20], "little") == 1
    assert len(raw) == 20 + 8


def test_embedding_file_empty(tmp_path):
    path = tmp_path / "none.emb"
    write_embedding_file(path, [], np.zeros((0, 16), dtype=np.float32))
    loaded = read_embedding_file(path)
    assert loaded.count == 0 and loaded.dim == 16


def test_embedding_file_bad_magic(tmp_path):
    path = tmp_path / "bad.emb"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 12)
    (tmp_path / "bad.emb.ids").write_text("", encoding="utf-8")
    with pytest.raises(EmbeddingFileError):
        read_embedding_file(path)


def test_embedding_file_sidecar_mismatch(tmp_path):
    path = tmp_path / "m.emb"
    write_embedding_file(path, ["a", "b"], np.ones((2, 2), dtype=np.float32))
    (tmp_path / "m.emb.ids").write_text("a\n", encoding="utf-8")
    with pytest.raises(EmbeddingFileError):
        read_embedding_file(path)


def test_embedding_file_failed_flags(tmp_path):
    path = tmp_path / "f.emb"
    matrix = np.vstack([np.ones((1, 3)), np.zeros((1, 3))]).astype(np.float32)
    write_embedding_file(path, ["good", "bad"], matrix, failed_ids={"bad"})
    loaded = read_embedding_file(path)
    assert loaded.failed_ids == frozenset({"bad"})
    with pytest.raises(EmbeddingFileError):
        EmbeddingIndex.load(path)


def test_index_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    matrix = np.stack([l2_normalize(v) for v in rng.normal(size=(5, 6))]).astype(np.float32)
    index = EmbeddingIndex([f"i{i}" for i in range(5)], matrix)
    path = tmp_path / "index.emb"
    index.save(path)
    loaded = EmbeddingIndex.load(path)
    assert loaded.ids == index.ids
    assert np.array_equal(loaded.matrix, index.matrix)
