"""End-to-end experiment execution with resume and content-addressed artifacts.

A run walks each configured context size k over the test set:
select -> build context -> serialize -> transcribe -> score. k=0 skips
selection entirely. Per-utterance hypotheses are appended to a progress
log as they complete, so an interrupted run resumes without recomputing
finished utterances; completed cells are loaded from disk verbatim.

Manifests are byte-deterministic for a fixed config and seed: anything
that varies between identical runs (wall-clock timings) is written to a
separate sidecar, never into the manifest.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..context import DEFAULT_TEMPLATE_TEXT, PromptTemplate, build_context, serialize_context
from ..embedding import EmbeddingIndex, build_index
from ..embfile import read_embedding_file
from ..errors import ConfigError, TiclError
from ..pool import CandidatePool, filter_duration, load_pool
from ..scoring import CER, WER, corpus_error_rate, score_pair
from ..selection import (
    PseudoLabel,
    SelectionResult,
    load_pseudo_labels,
    select_by_audio_embedding,
    select_random,
    select_ticl,
    write_selections,
)
from .backends import Backend, make_backend
from .config import ExperimentConfig
from .embedders import make_embedder

ZERO_SHOT_LABEL = "zero_shot"


@dataclass(frozen=True)
class CellMetrics:
    metric_kind: str
    error_rate: float
    total_errors: int
    total_ref_tokens: int

    def to_json(self) -> dict:
        return {
            "metric_kind": self.metric_kind,
            "error_rate": self.error_rate,
            "total_errors": self.total_errors,
            "total_ref_tokens": self.total_ref_tokens,
        }


@dataclass(frozen=True)
class CellResult:
    key: str
    strategy: str
    k: int
    status: str  # "ok" | "failed"
    metrics: CellMetrics | None = None
    cause: str | None = None
    artifacts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "k": self.k,
            "status": self.status,
            "metrics": self.metrics.to_json() if self.metrics else None,
            "cause": self.cause,
            "artifacts": dict(sorted(self.artifacts.items())),
        }


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    metric_kind: str
    norm_scheme: str
    cells: dict[str, CellResult]
    pseudo_label_metrics: CellMetrics | None = None
    tool_version: str = __version__
    timings_s: dict[str, float] = field(default_factory=dict)  # sidecar only

    def to_json(self) -> dict:
        # Timings deliberately excluded: manifests must be byte-identical
        # across reruns of the same config.
        return {
            "kind": "ticl_run_manifest",
            "tool_version": self.tool_version,
            "config": self.config,
            "config_hash": self.config_hash,
            "metric": {"kind": self.metric_kind, "norm": self.norm_scheme},
            "pseudo_label_metrics": (
                self.pseudo_label_metrics.to_json() if self.pseudo_label_metrics else None
            ),
            "cells": {key: cell.to_json() for key, cell in sorted(self.cells.items())},
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")

    def best_k(self) -> tuple[int, float] | None:
        rated = [
            (cell.metrics.error_rate, cell.k)
            for cell in self.cells.values()
            if cell.status == "ok" and cell.metrics and cell.k > 0
        ]
        if not rated:
            return None
        rate, k = min(rated)
        return k, rate

    def rate_at(self, k: int) -> float | None:
        for cell in self.cells.values():
            if cell.k == k and cell.status == "ok" and cell.metrics:
                return cell.metrics.error_rate
        return None


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _sanitize(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in label)


def _resolve_metric_kind(test_pool: CandidatePool, cer_languages: tuple[str, ...],
                         overrides: dict[str, str] | None = None) -> str:
    cer_set = {lang.lower() for lang in cer_languages}
    overrides = overrides or {}
    kinds = set()
    for record in test_pool:
        base = record.language.split("-")[0].lower()
        if record.language.lower() in overrides:
            kinds.add(overrides[record.language.lower()])
        elif base in overrides:
            kinds.add(overrides[base])
        else:
            kinds.add(CER if base in cer_set else WER)
    if not kinds:
        raise ConfigError("test manifest is empty")
    if len(kinds) > 1:
        raise ConfigError(
            "test set mixes WER- and CER-scored languages; split it into per-language runs"
        )
    return kinds.pop()


def _index_cache_key(manifest_path: str, embedder_id: str,
                     bounds: tuple[float, float] | None) -> str:
    h = hashlib.sha256()
    h.update(Path(manifest_path).read_bytes())
    h.update(embedder_id.encode("utf-8"))
    h.update(repr(bounds).encode("utf-8"))
    return h.hexdigest()[:16]


def _build_or_load_index(config: ExperimentConfig, candidates: CandidatePool,
                         shared_dir: Path) -> EmbeddingIndex:
    if config.strategy.index_path:
        return EmbeddingIndex.load(config.strategy.index_path)
    embedder = make_embedder(config.strategy.embedder, config.strategy.adapter_url)
    bounds = None
    if config.min_duration_s is not None:
        bounds = (config.min_duration_s, config.max_duration_s)
    cache_key = _index_cache_key(config.pool_manifest, config.strategy.embedder, bounds)
    cache_path = shared_dir / f"index-{cache_key}.emb"
    if cache_path.exists():
        return EmbeddingIndex.load(cache_path)
    embeddings = {record.id: embedder(record.transcript) for record in candidates}
    index = build_index(candidates, embeddings)
    shared_dir.mkdir(parents=True, exist_ok=True)
    index.save(cache_path)
    return index


def _load_test_embeddings(path: str) -> dict[str, np.ndarray]:
    emb = read_embedding_file(path)
    return {record_id: emb.matrix[i] for i, record_id in enumerate(emb.ids)}


def _select_for(
    config: ExperimentConfig,
    record_id: str,
    k: int,
    candidates: CandidatePool,
    index: EmbeddingIndex | None,
    pseudo_labels: dict[str, PseudoLabel],
    embedder,
    test_embeddings: dict[str, np.ndarray] | None,
) -> SelectionResult:
    kind = config.strategy.kind
    if kind == "ticl":
        label = pseudo_labels.get(record_id)
        if label is None:
            raise ConfigError(f"no pseudo-label for test id {record_id!r}")
        return select_ticl(candidates, index, label, embedder, k)
    if kind == "random":
        return select_random(candidates, k, config.seed, test_id=record_id)
    # audio / speaker
    if test_embeddings is None or record_id not in test_embeddings:
        raise ConfigError(f"no test embedding for id {record_id!r}")
    strategy_tag = "audio_embedding" if kind == "audio" else "speaker_embedding"
    return select_by_audio_embedding(
        candidates, index, test_embeddings[record_id], k,
        test_id=record_id, embedding_family=config.strategy.embedder, strategy=strategy_tag,
    )


def _cell_key(config: ExperimentConfig, k: int) -> str:
    if k == 0:
        # Zero-shot never touches a selector, so the cell is shared
        # across strategy sweeps against the same backend.
        return "k0"
    return _sanitize(f"{config.strategy.label()}-k{k}")


def _read_progress(cell_dir: Path) -> dict[str, str]:
    done: dict[str, str] = {}
    final = cell_dir / "hyps.jsonl"
    partial = cell_dir / "progress.jsonl"
    for path in (final, partial):
        if not path.exists():
            continue
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                done[row["test_id"]] = row["hypothesis"]
    return done


def _run_cell(
    config: ExperimentConfig,
    k: int,
    run_dir: Path,
    test_pool: CandidatePool,
    candidates: CandidatePool,
    index: EmbeddingIndex | None,
    pseudo_labels: dict[str, PseudoLabel],
    embedder,
    test_embeddings: dict[str, np.ndarray] | None,
    backend: Backend,
    template: PromptTemplate,
    metric_kind: str,
) -> CellResult:
    key = _cell_key(config, k)
    cell_dir = run_dir / "cells" / key
    cell_dir.mkdir(parents=True, exist_ok=True)
    strategy_label = ZERO_SHOT_LABEL if k == 0 else config.strategy.label()

    done = _read_progress(cell_dir)
    selections: dict[str, SelectionResult] = {}
    requests = {}
    errors: dict[str, str] = {}

    for record in test_pool:
        try:
            selection = _select_for(
                config, record.id, k, candidates, index, pseudo_labels, embedder, test_embeddings,
            ) if k > 0 else SelectionResult(
                test_id=record.id, strategy=strategy_label, neighbors=(), k_requested=0,
            )
            selections[record.id] = selection
            if record.id in done:
                continue
            context = build_context(
                selection, candidates, template, record.audio_path,
                order_policy=config.order_policy,
            )
            requests[record.id] = serialize_context(
                context, model=config.backend_model, max_new_tokens=config.max_new_tokens,
            )
        except TiclError as exc:
            errors[record.id] = f"{type(exc).__name__}: {exc}"

    progress_path = cell_dir / "progress.jsonl"
    with progress_path.open("a", encoding="utf-8") as progress:
        def record_done(test_id: str, hypothesis: str) -> None:
            progress.write(json.dumps(
                {"test_id": test_id, "hypothesis": hypothesis}, ensure_ascii=False) + "\n")
            progress.flush()
            done[test_id] = hypothesis

        if config.max_in_flight <= 1 or len(requests) <= 1:
            for test_id in sorted(requests):
                try:
                    record_done(test_id, backend.transcribe(requests[test_id]))
                except Exception as exc:  # noqa: BLE001 - cell isolation boundary
                    errors[test_id] = f"{type(exc).__name__}: {exc}"
        else:
            with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
                futures = {
                    pool.submit(backend.transcribe, req): test_id
                    for test_id, req in sorted(requests.items())
                }
                for future in as_completed(futures):
                    test_id = futures[future]
                    try:
                        record_done(test_id, future.result())
                    except Exception as exc:  # noqa: BLE001 - cell isolation boundary
                        errors[test_id] = f"{type(exc).__name__}: {exc}"

    artifacts = {
        "hypotheses": str(Path("cells") / key / "hyps.jsonl"),
        "contexts": str(Path("cells") / key / "requests.jsonl"),
    }
    if k > 0:
        artifacts["selections"] = str(Path("cells") / key / "selections.jsonl")

    if errors:
        summary = "; ".join(f"{tid}: {msg}" for tid, msg in sorted(errors.items())[:3])
        more = len(errors) - min(len(errors), 3)
        if more > 0:
            summary += f" (+{more} more)"
        return CellResult(key=key, strategy=strategy_label, k=k, status="failed",
                          cause=summary, artifacts=artifacts)

    # Finalize deterministic per-cell artifacts, sorted by test id.
    with (cell_dir / "hyps.jsonl").open("w", encoding="utf-8") as fh:
        for test_id in sorted(done):
            fh.write(json.dumps(
                {"test_id": test_id, "hypothesis": done[test_id]}, ensure_ascii=False) + "\n")
    if k > 0:
        write_selections(
            [selections[test_id] for test_id in sorted(selections)],
            cell_dir / "selections.jsonl",
        )
    with (cell_dir / "requests.jsonl").open("w", encoding="utf-8") as fh:
        for record in sorted(test_pool, key=lambda r: r.id):
            context = build_context(
                selections[record.id], candidates, template, record.audio_path,
                order_policy=config.order_policy,
            )
            request = serialize_context(
                context, model=config.backend_model, max_new_tokens=config.max_new_tokens,
            )
            fh.write(request.to_bytes().decode("utf-8") + "\n")

    eval_records = [
        score_pair(
            record.id, record.transcript, done[record.id], record.language,
            metric_kind=metric_kind, scheme=config.norm_scheme,
        )
        for record in test_pool
    ]
    aggregate = corpus_error_rate(eval_records, metric_kind)
    metrics = CellMetrics(
        metric_kind=metric_kind,
        error_rate=aggregate.error_rate,
        total_errors=aggregate.total_errors,
        total_ref_tokens=aggregate.total_ref_tokens,
    )
    return CellResult(key=key, strategy=strategy_label, k=k, status="ok",
                      metrics=metrics, artifacts=artifacts)


def run_experiment(config: ExperimentConfig, work_dir: str | Path,
                   shared_dir: str | Path | None = None,
                   backend: Backend | None = None) -> RunManifest:
    """Execute every (k) cell of a config; resumable and deterministic.

    Artifacts land under work_dir; the manifest is written to
    work_dir/manifest.json and timings to work_dir/timings.json.
    shared_dir holds content-addressed index caches so sweeps can
    share pool/index work; it defaults to work_dir/shared. An explicit
    backend instance overrides the config's backend spec.
    """
    run_dir = Path(work_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    shared_dir = Path(shared_dir) if shared_dir is not None else run_dir / "shared"

    candidates = load_pool(config.pool_manifest)
    if config.min_duration_s is not None:
        candidates = filter_duration(candidates, config.min_duration_s, config.max_duration_s)
    test_pool = load_pool(config.test_manifest)
    metric_kind = _resolve_metric_kind(test_pool, config.cer_languages, config.metric_overrides)

    pseudo_labels: dict[str, PseudoLabel] = {}
    if config.pseudo_label_file:
        pseudo_labels = load_pseudo_labels(config.pseudo_label_file)

    template = (
        PromptTemplate.load(config.template)
        if config.template
        else PromptTemplate(DEFAULT_TEMPLATE_TEXT)
    )

    needs_index = config.strategy.kind in ("ticl", "audio", "speaker") and any(
        k > 0 for k in config.k_values
    )
    index = None
    embedder = None
    test_embeddings = None
    if needs_index:
        if config.strategy.kind == "ticl":
            index = _build_or_load_index(config, candidates, shared_dir)
            embedder = make_embedder(config.strategy.embedder, config.strategy.adapter_url)
        else:
            index = EmbeddingIndex.load(config.strategy.index_path)
            test_embeddings = _load_test_embeddings(config.strategy.test_emb_path)

    if backend is None:
        backend = make_backend(config.backend, pseudo_labels, model_id=config.backend_model)

    pseudo_metrics = None
    if pseudo_labels:
        scored = [
            score_pair(
                record.id, record.transcript, pseudo_labels[record.id].text, record.language,
                metric_kind=metric_kind, scheme=config.norm_scheme,
            )
            for record in test_pool
            if record.id in pseudo_labels
        ]
        if scored:
            aggregate = corpus_error_rate(scored, metric_kind)
            pseudo_metrics = CellMetrics(
                metric_kind=metric_kind,
                error_rate=aggregate.error_rate,
                total_errors=aggregate.total_errors,
                total_ref_tokens=aggregate.total_ref_tokens,
            )

    cells: dict[str, CellResult] = {}
    timings: dict[str, float] = {}
    for k in config.k_values:
        started = time.perf_counter()
        cell = _run_cell(
            config, k, run_dir, test_pool, candidates, index, pseudo_labels,
            embedder, test_embeddings, backend, template, metric_kind,
        )
        timings[cell.key] = time.perf_counter() - started
        cells[cell.key] = cell

    manifest = RunManifest(
        config=config.snapshot(),
        config_hash=config.content_hash(),
        metric_kind=metric_kind,
        norm_scheme=config.norm_scheme,
        cells=cells,
        pseudo_label_metrics=pseudo_metrics,
        timings_s=timings,
    )
    (run_dir / "manifest.json").write_bytes(manifest.to_bytes())
    (run_dir / "timings.json").write_text(
        json.dumps({"cells_s": timings, "total_s": sum(timings.values())}, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest
