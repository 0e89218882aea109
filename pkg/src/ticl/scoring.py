"""WER/CER scoring with language-aware normalization.

Error rates are pooled at the corpus level (sum of edit operations over
sum of reference tokens), not averaged per utterance. CER is the
default metric for zh, ja, and th; WER everywhere else. Both defaults
are overridable. Absolute rates are normalization-sensitive, so the
scheme used is recorded in every report.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyReferenceCorpus, ZeroBaseline

WER = "wer"
CER = "cer"

# Languages scored by character error rate unless overridden.
DEFAULT_CER_LANGUAGES = ("zh", "ja", "th")


@dataclass(frozen=True)
class EvalRecord:
    """Scored hypothesis/reference pair with its edit-operation counts."""

    test_id: str
    reference: str
    hypothesis: str
    language: str
    substitutions: int
    deletions: int
    insertions: int
    ref_token_count: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass(frozen=True)
class AggregateMetrics:
    """Corpus-level pooled error rate; may exceed 100% through insertions."""

    metric_kind: str
    error_rate: float
    total_errors: int
    total_ref_tokens: int
    per_k: dict[int, float] = field(default_factory=dict)


def metric_for_language(language: str, overrides: dict[str, str] | None = None) -> str:
    """Pick wer or cer for a language tag ("zh-CN" matches the "zh" default)."""
    base = language.split("-")[0].lower()
    if overrides:
        if language in overrides:
            return overrides[language]
        if base in overrides:
            return overrides[base]
    return CER if base in DEFAULT_CER_LANGUAGES else WER


def normalize_text(text: str, language: str = "und", scheme: str = "basic") -> str:
    """Normalize for scoring: NFKC, lowercase, strip punctuation, collapse spaces.

    Diacritics are preserved; only case, punctuation-category characters,
    and whitespace are touched. scheme "none" is the identity.
    """
    if scheme == "none":
        return text
    if scheme != "basic":
        raise ValueError(f"unknown normalization scheme {scheme!r}")
    text = unicodedata.normalize("NFKC", text).lower()
    kept = [ch for ch in text if not unicodedata.category(ch).startswith("P")]
    return " ".join("".join(kept).split())


def tokenize(text: str, metric_kind: str) -> list[str]:
    """wer: whitespace-split words; cer: individual non-whitespace characters."""
    if metric_kind == WER:
        return text.split()
    if metric_kind == CER:
        return [ch for ch in text if not ch.isspace()]
    raise ValueError(f"unknown metric kind {metric_kind!r}")


def edit_distance(ref_tokens: list[str], hyp_tokens: list[str]) -> tuple[int, int, int]:
    """Return (substitutions, deletions, insertions) of a minimal alignment.

    Among minimal alignments the counts come from the one preferring
    substitution over insertion over deletion, which is the unique
    decomposition minimizing insertions; this keeps per-record counts
    reproducible.
    """
    m, n = len(ref_tokens), len(hyp_tokens)
    # prev[j] = (cost, insertions) for aligning ref[:i] with hyp[:j].
    prev = [(j, j) for j in range(n + 1)]
    for i in range(1, m + 1):
        cur = [(i, 0)] + [(0, 0)] * n
        ref_tok = ref_tokens[i - 1]
        for j in range(1, n + 1):
            diag_cost, diag_ins = prev[j - 1]
            if ref_tok == hyp_tokens[j - 1]:
                best = (diag_cost, diag_ins)
            else:
                best = (diag_cost + 1, diag_ins)
            ins_cost, ins_ins = cur[j - 1]
            cand = (ins_cost + 1, ins_ins + 1)
            if cand < best:
                best = cand
            del_cost, del_ins = prev[j]
            cand = (del_cost + 1, del_ins)
            if cand < best:
                best = cand
            cur[j] = best
        prev = cur
    cost, insertions = prev[n]
    deletions = insertions + (m - n)
    substitutions = cost - insertions - deletions
    return substitutions, deletions, insertions


def score_pair(
    test_id: str,
    reference: str,
    hypothesis: str,
    language: str = "und",
    metric_kind: str | None = None,
    scheme: str = "basic",
    metric_overrides: dict[str, str] | None = None,
) -> EvalRecord:
    """Normalize, tokenize, and align one reference/hypothesis pair."""
    kind = metric_kind or metric_for_language(language, metric_overrides)
    ref_tokens = tokenize(normalize_text(reference, language, scheme), kind)
    hyp_tokens = tokenize(normalize_text(hypothesis, language, scheme), kind)
    s, d, i = edit_distance(ref_tokens, hyp_tokens)
    return EvalRecord(
        test_id=test_id,
        reference=reference,
        hypothesis=hypothesis,
        language=language,
        substitutions=s,
        deletions=d,
        insertions=i,
        ref_token_count=len(ref_tokens),
    )


def corpus_error_rate(records: list[EvalRecord], metric_kind: str = WER) -> AggregateMetrics:
    """Pooled rate: 100 * sum(S+D+I) / sum(reference tokens)."""
    total_errors = sum(r.errors for r in records)
    total_ref = sum(r.ref_token_count for r in records)
    if total_ref == 0:
        raise EmptyReferenceCorpus("reference corpus has no tokens")
    return AggregateMetrics(
        metric_kind=metric_kind,
        error_rate=100.0 * total_errors / total_ref,
        total_errors=total_errors,
        total_ref_tokens=total_ref,
    )


def relative_reduction(baseline_rate: float, treated_rate: float) -> float:
    """Relative error-rate reduction vs. a baseline, in percent.

    Negative when the treated rate is worse than the baseline.
    """
    if baseline_rate <= 0:
        raise ZeroBaseline(f"baseline rate must be > 0, got {baseline_rate}")
    return 100.0 * (baseline_rate - treated_rate) / baseline_rate


def write_score_file(records: list[EvalRecord], out_path: str | Path) -> None:
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(
                {
                    "test_id": r.test_id,
                    "reference": r.reference,
                    "hypothesis": r.hypothesis,
                    "S": r.substitutions,
                    "D": r.deletions,
                    "I": r.insertions,
                    "ref_token_count": r.ref_token_count,
                },
                ensure_ascii=False,
            ) + "\n")
