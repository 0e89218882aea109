"""Report emission: per-k rate tables with relative reductions vs. zero-shot.

Two files per report: a TSV for machines and a Markdown table for
humans. The best (lowest-rate) k>0 cell per column is bolded, and the
reduction against the k=0 baseline is printed both at the best k and at
the largest k, since sweeps do not always end on their best cell.
Output is byte-deterministic for identical manifests.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..scoring import relative_reduction
from .runner import RunManifest

NOT_APPLICABLE = "n/a"


def _fmt_rate(rate: float | None) -> str:
    return NOT_APPLICABLE if rate is None else f"{rate:.2f}"


def _fmt_delta(baseline: float | None, treated: float | None) -> str:
    if baseline is None or treated is None or baseline <= 0:
        return NOT_APPLICABLE
    return f"{relative_reduction(baseline, treated):.1f}%"


def _column_label(manifest: RunManifest) -> str:
    strategies = {
        cell.strategy for cell in manifest.cells.values() if cell.k > 0
    }
    strategy = strategies.pop() if len(strategies) == 1 else manifest.config.get("name", "run")
    return f"{manifest.config.get('name', 'run')}:{strategy}"


def emit_report(manifests: list[RunManifest], out_dir: str | Path,
                stem: str = "report") -> tuple[Path, Path]:
    """Write <stem>.tsv and <stem>.md under out_dir; returns both paths."""
    if not manifests:
        raise ValueError("emit_report needs at least one manifest")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv_path = out / f"{stem}.tsv"
    md_path = out / f"{stem}.md"

    all_k = sorted({cell.k for m in manifests for cell in m.cells.values()})
    columns = [(_column_label(m), m) for m in manifests]

    # Machine-readable rows: one line per (run, cell).
    with tsv_path.open("w", encoding="utf-8") as fh:
        fh.write("run\tstrategy\tk\tmetric\tnorm\terror_rate\ttotal_errors\ttotal_ref_tokens\tstatus\tcause\n")
        for label, manifest in columns:
            for _, cell in sorted(manifest.cells.items(), key=lambda kv: (kv[1].k, kv[0])):
                metrics = cell.metrics
                fh.write("\t".join([
                    manifest.config.get("name", "run"),
                    cell.strategy,
                    str(cell.k),
                    manifest.metric_kind,
                    manifest.norm_scheme,
                    _fmt_rate(metrics.error_rate if metrics else None),
                    str(metrics.total_errors) if metrics else NOT_APPLICABLE,
                    str(metrics.total_ref_tokens) if metrics else NOT_APPLICABLE,
                    cell.status,
                    cell.cause or "",
                ]) + "\n")

    lines = ["# Error-rate report", ""]
    metric_kinds = sorted({m.metric_kind for m in manifests})
    norms = sorted({m.norm_scheme for m in manifests})
    lines.append(f"Metric: {', '.join(metric_kinds)} (normalization: {', '.join(norms)}); "
                 "rates are corpus-pooled percentages, lower is better.")
    for _, manifest in columns:
        if manifest.pseudo_label_metrics is not None:
            lines.append(
                f"Pseudo-label {manifest.metric_kind} "
                f"[{manifest.config.get('pseudo_labeler', '?')}, "
                f"{manifest.config.get('name', 'run')}]: "
                f"{_fmt_rate(manifest.pseudo_label_metrics.error_rate)}"
            )
    lines.append("")

    header = ["k"] + [label for label, _ in columns]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")

    best_by_column = {}
    for label, manifest in columns:
        best = manifest.best_k()
        best_by_column[label] = best  # (k, rate) or None

    for k in all_k:
        row = [str(k)]
        for label, manifest in columns:
            rate = manifest.rate_at(k)
            text = _fmt_rate(rate)
            best = best_by_column[label]
            if best is not None and rate is not None and k == best[0]:
                text = f"**{text}**"
            row.append(text)
        lines.append("| " + " | ".join(row) + " |")

    delta_best = ["delta_rel (best k)"]
    delta_max = ["delta_rel (max k)"]
    for label, manifest in columns:
        baseline = manifest.rate_at(0)
        best = best_by_column[label]
        delta_best.append(
            f"{_fmt_delta(baseline, best[1])} (k={best[0]})" if best else NOT_APPLICABLE
        )
        ks = [cell.k for cell in manifest.cells.values() if cell.k > 0 and cell.status == "ok"]
        delta_max.append(
            _fmt_delta(baseline, manifest.rate_at(max(ks))) if ks else NOT_APPLICABLE
        )
    lines.append("| " + " | ".join(delta_best) + " |")
    lines.append("| " + " | ".join(delta_max) + " |")
    lines.append("")

    md_path.write_text("\n".join(lines), encoding="utf-8")
    return tsv_path, md_path


def manifest_from_file(path: str | Path) -> RunManifest:
    """Rehydrate a manifest written by run_experiment."""
    from .runner import CellMetrics, CellResult

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cells = {}
    for key, raw in doc["cells"].items():
        metrics = None
        if raw.get("metrics"):
            metrics = CellMetrics(**raw["metrics"])
        cells[key] = CellResult(
            key=key,
            strategy=raw["strategy"],
            k=raw["k"],
            status=raw["status"],
            metrics=metrics,
            cause=raw.get("cause"),
            artifacts=raw.get("artifacts", {}),
        )
    pseudo = None
    if doc.get("pseudo_label_metrics"):
        pseudo = CellMetrics(**doc["pseudo_label_metrics"])
    return RunManifest(
        config=doc["config"],
        config_hash=doc["config_hash"],
        metric_kind=doc["metric"]["kind"],
        norm_scheme=doc["metric"]["norm"],
        cells=cells,
        pseudo_label_metrics=pseudo,
        tool_version=doc.get("tool_version", "unknown"),
    )
