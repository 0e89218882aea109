"""Command-line interface.

Subcommands mirror the pipeline stages: pool validation/filtering,
index build/query, selection, scoring, experiment runs, sweeps, and
report emission. Run `ticl <command> -h` for per-command flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .embedding import EmbeddingIndex, build_index, knn_query, l2_normalize
from .embfile import read_embedding_file
from .errors import TiclError
from .harness.config import StrategySpec, load_config, parse_k_values
from .harness.embedders import make_embedder
from .harness.report import emit_report, manifest_from_file
from .harness.runner import run_experiment
from .harness.sweeps import compare_strategies, sweep_k, sweep_pseudo_labeler
from .pool import filter_duration, load_pool, save_pool
from .scoring import score_pair, corpus_error_rate, write_score_file
from .selection import (
    load_pseudo_labels,
    select_by_audio_embedding,
    select_random,
    select_ticl,
    write_selections,
)


def _cmd_pool_validate(args) -> int:
    pool = load_pool(args.manifest)
    languages = sorted({r.language for r in pool})
    splits = sorted({r.split for r in pool})
    print(f"ok: {len(pool)} records, languages={languages}, splits={splits}")
    return 0


def _cmd_pool_filter(args) -> int:
    pool = load_pool(args.manifest)
    filtered = filter_duration(pool, args.min_s, args.max_s)
    save_pool(filtered, args.output)
    print(f"kept {len(filtered)}/{len(pool)} records ({filtered.filter_provenance}) -> {args.output}")
    return 0


def _cmd_index_build(args) -> int:
    pool = load_pool(args.pool)
    emb = read_embedding_file(args.emb)
    if emb.failed_ids:
        print(f"error: embedding file flags {len(emb.failed_ids)} failed rows", file=sys.stderr)
        return 1
    embeddings = {record_id: emb.matrix[i] for i, record_id in enumerate(emb.ids)}
    index = build_index(pool, embeddings)
    index.save(args.output)
    print(f"indexed {len(index)} rows (dim {index.dim}) -> {args.output}")
    return 0


def _cmd_index_query(args) -> int:
    index = EmbeddingIndex.load(args.index)
    query_file = read_embedding_file(args.query_emb)
    if query_file.count != 1:
        print(f"error: query embedding file must hold exactly 1 row, found {query_file.count}",
              file=sys.stderr)
        return 1
    query = l2_normalize(query_file.matrix[0])
    neighbors = knn_query(index, query, args.k, exclude_ids=set(args.exclude))
    for n in neighbors:
        print(json.dumps({"rank": n.rank, "id": n.id, "distance": n.distance}))
    return 0


def _cmd_select(args) -> int:
    if args.strategy == "ticl" and not (args.index and args.pseudo_labels):
        print("error: --strategy ticl needs --index and --pseudo-labels", file=sys.stderr)
        return 1
    if args.strategy == "audio" and not (args.index and args.test_emb):
        print("error: --strategy audio needs --index and --test-emb", file=sys.stderr)
        return 1
    pool = load_pool(args.pool)
    selections = []
    if args.strategy == "ticl":
        index = EmbeddingIndex.load(args.index)
        embedder = make_embedder(args.embedder, args.adapter_url)
        labels = load_pseudo_labels(args.pseudo_labels)
        for test_id in sorted(labels):
            selections.append(select_ticl(pool, index, labels[test_id], embedder, args.k))
    elif args.strategy == "random":
        test_ids = sorted(load_pseudo_labels(args.pseudo_labels)) if args.pseudo_labels else [""]
        for test_id in test_ids:
            selections.append(select_random(pool, args.k, args.seed, test_id=test_id))
    else:  # audio
        index = EmbeddingIndex.load(args.index)
        test_emb = read_embedding_file(args.test_emb)
        for i, test_id in enumerate(test_emb.ids):
            selections.append(select_by_audio_embedding(
                pool, index, test_emb.matrix[i], args.k, test_id=test_id,
            ))
    write_selections(selections, args.output)
    print(f"wrote {len(selections)} selections -> {args.output}")
    return 0


def _read_text_lines(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            out[str(row["test_id"])] = str(row["text"])
    return out


def _cmd_score(args) -> int:
    refs = _read_text_lines(args.refs)
    hyps = _read_text_lines(args.hyps)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        print(f"error: {len(missing)} reference ids missing from hypotheses "
              f"(first: {missing[:3]})", file=sys.stderr)
        return 1
    records = [
        score_pair(test_id, refs[test_id], hyps[test_id], args.language,
                   metric_kind=args.metric, scheme=args.norm)
        for test_id in sorted(refs)
    ]
    aggregate = corpus_error_rate(records, args.metric)
    write_score_file(records, args.output)
    print(f"{args.metric} {aggregate.error_rate:.2f}% "
          f"({aggregate.total_errors} errors / {aggregate.total_ref_tokens} ref tokens) "
          f"-> {args.output}")
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    manifest = run_experiment(config, args.work_dir)
    failed = [key for key, cell in manifest.cells.items() if cell.status != "ok"]
    for key, cell in sorted(manifest.cells.items(), key=lambda kv: kv[1].k):
        rate = f"{cell.metrics.error_rate:.2f}" if cell.metrics else "failed"
        print(f"{key}: k={cell.k} {manifest.metric_kind}={rate}")
    print(f"manifest -> {Path(args.work_dir) / 'manifest.json'}")
    return 1 if failed else 0


def _cmd_sweep_k(args) -> int:
    config = load_config(args.config)
    entry = sweep_k(config, parse_k_values(args.k_values), args.work_dir)
    if not entry.ok:
        print(f"sweep failed: {entry.error}", file=sys.stderr)
        return 1
    emit_report([entry.manifest], args.work_dir, stem="k-sweep-report")
    print(f"report -> {Path(args.work_dir) / 'k-sweep-report.md'}")
    return 0


def _cmd_sweep_labeler(args) -> int:
    config = load_config(args.config)
    labelers = []
    for spec in args.labeler:
        if "=" not in spec:
            print(f"error: labeler spec must be id=file, got {spec!r}", file=sys.stderr)
            return 1
        labeler_id, label_file = spec.split("=", 1)
        labelers.append((labeler_id, label_file))
    entries = sweep_pseudo_labeler(config, labelers, args.work_dir)
    ok_manifests = [e.manifest for e in entries if e.ok]
    for entry in entries:
        status = "ok" if entry.ok else f"failed: {entry.error}"
        print(f"{entry.label}: {status}")
    if ok_manifests:
        emit_report(ok_manifests, args.work_dir, stem="labeler-sweep-report")
        print(f"report -> {Path(args.work_dir) / 'labeler-sweep-report.md'}")
    return 0 if all(e.ok for e in entries) else 1


def _parse_strategy_spec(spec: str) -> StrategySpec:
    # kind[:key=value,...] e.g. "ticl:embedder=hash-ngram", "audio:index=x.emb,test_emb=y.emb"
    kind, _, rest = spec.partition(":")
    options = {}
    if rest:
        for pair in rest.split(","):
            key, _, value = pair.partition("=")
            options[key] = value
    return StrategySpec(
        kind=kind,
        embedder=options.get("embedder", "hash-ngram"),
        adapter_url=options.get("adapter_url"),
        index_path=options.get("index"),
        test_emb_path=options.get("test_emb"),
    )


def _cmd_compare(args) -> int:
    config = load_config(args.config)
    strategies = [_parse_strategy_spec(s) for s in args.strategy]
    entries = compare_strategies(config, strategies, args.work_dir)
    ok_manifests = [e.manifest for e in entries if e.ok]
    for entry in entries:
        status = "ok" if entry.ok else f"failed: {entry.error}"
        print(f"{entry.label}: {status}")
    if ok_manifests:
        emit_report(ok_manifests, args.work_dir, stem="strategy-comparison")
        print(f"report -> {Path(args.work_dir) / 'strategy-comparison.md'}")
    return 0 if all(e.ok for e in entries) else 1


def _cmd_report(args) -> int:
    manifests = [manifest_from_file(path) for path in args.manifests]
    tsv_path, md_path = emit_report(manifests, args.out_dir)
    print(f"wrote {tsv_path} and {md_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ticl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ticl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="manifest validation and filtering")
    pool_sub = pool.add_subparsers(dest="pool_command", required=True)
    validate = pool_sub.add_parser("validate", help="parse a manifest and report its shape")
    validate.add_argument("manifest")
    validate.set_defaults(func=_cmd_pool_validate)
    pfilter = pool_sub.add_parser("filter", help="keep records inside a duration range")
    pfilter.add_argument("manifest")
    pfilter.add_argument("--min-s", type=float, required=True)
    pfilter.add_argument("--max-s", type=float, required=True)
    pfilter.add_argument("-o", "--output", required=True)
    pfilter.set_defaults(func=_cmd_pool_filter)

    index = sub.add_parser("index", help="embedding index build and query")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    ibuild = index_sub.add_parser("build", help="build a unit-norm index from an embedding file")
    ibuild.add_argument("--pool", required=True)
    ibuild.add_argument("--emb", required=True)
    ibuild.add_argument("-o", "--output", required=True)
    ibuild.set_defaults(func=_cmd_index_build)
    iquery = index_sub.add_parser("query", help="exact KNN lookup against an index")
    iquery.add_argument("--index", required=True)
    iquery.add_argument("--query-emb", required=True)
    iquery.add_argument("-k", type=int, default=4)
    iquery.add_argument("--exclude", action="append", default=[])
    iquery.set_defaults(func=_cmd_index_query)

    select = sub.add_parser("select", help="choose in-context examples per test utterance")
    select.add_argument("--strategy", choices=["ticl", "random", "audio"], required=True)
    select.add_argument("--pool", required=True)
    select.add_argument("--index")
    select.add_argument("--k", type=int, default=4)
    select.add_argument("--pseudo-labels")
    select.add_argument("--embedder", default="hash-ngram")
    select.add_argument("--adapter-url")
    select.add_argument("--test-emb")
    select.add_argument("--seed", type=int, default=0)
    select.add_argument("-o", "--output", required=True)
    select.set_defaults(func=_cmd_select)

    score = sub.add_parser("score", help="WER/CER between reference and hypothesis files")
    score.add_argument("--refs", required=True)
    score.add_argument("--hyps", required=True)
    score.add_argument("--metric", choices=["wer", "cer"], default="wer")
    score.add_argument("--norm", choices=["basic", "none"], default="basic")
    score.add_argument("--language", default="und")
    score.add_argument("-o", "--output", required=True)
    score.set_defaults(func=_cmd_score)

    run = sub.add_parser("run", help="run one experiment config end to end")
    run.add_argument("-c", "--config", required=True)
    run.add_argument("-w", "--work-dir", default="ticl-work")
    run.set_defaults(func=_cmd_run)

    sweepk = sub.add_parser("sweep-k", help="sweep context sizes for one config")
    sweepk.add_argument("-c", "--config", required=True)
    sweepk.add_argument("--k-values", default="0,1,2,3,4,10,15,20")
    sweepk.add_argument("-w", "--work-dir", default="ticl-work")
    sweepk.set_defaults(func=_cmd_sweep_k)

    sweepl = sub.add_parser("sweep-labeler", help="sweep pseudo-labelers at fixed k values")
    sweepl.add_argument("-c", "--config", required=True)
    sweepl.add_argument("--labeler", action="append", required=True,
                        metavar="ID=FILE", help="labeler id and its pseudo-label file")
    sweepl.add_argument("-w", "--work-dir", default="ticl-work")
    sweepl.set_defaults(func=_cmd_sweep_labeler)

    compare = sub.add_parser("compare", help="compare selection strategies on one test set")
    compare.add_argument("-c", "--config", required=True)
    compare.add_argument("--strategy", action="append", required=True,
                         help="strategy spec, e.g. ticl:embedder=hash-ngram or random")
    compare.add_argument("-w", "--work-dir", default="ticl-work")
    compare.set_defaults(func=_cmd_compare)

    report = sub.add_parser("report", help="emit rate tables from run manifests")
    report.add_argument("manifests", nargs="+")
    report.add_argument("-o", "--out-dir", default=".")
    report.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TiclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
