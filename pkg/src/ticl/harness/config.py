"""Declarative experiment configuration.

Config files are INI-style key/value sections. Relative paths resolve
against the config file's directory. Schema:

    [experiment]
    name = globe-v2-ticl          ; label used in reports
    pool_manifest = pool.jsonl    ; candidate pool manifest
    test_manifest = test.jsonl    ; test set manifest
    k_values = 0,1,2,3,4          ; context sizes to run
    seed = 1234
    template = templates/en.txt   ; prompt template (optional, builtin default)
    order_policy = nearest_last   ; nearest_last | nearest_first | as_retrieved
    min_duration_s = 1            ; optional candidate duration filter
    max_duration_s = 15

    [strategy]
    kind = ticl                   ; ticl | random | audio | speaker
    embedder = hash-ngram         ; ticl query/index embedder
    adapter_url =                 ; required for non-builtin embedders
    index =                       ; optional prebuilt index (.emb + .emb.ids)
    test_emb =                    ; audio/speaker: test-side embedding file

    [pseudo_labels]
    labeler = whisper-large-v3-turbo
    file = pseudo.jsonl           ; {test_id, text, source_model} per line

    [backend]
    kind = mock:echo-nearest      ; or an adapter base URL
    model =                       ; adapter model id
    max_in_flight = 4
    max_new_tokens = 256

    [metrics]
    norm = basic                  ; basic | none
    cer_languages = zh,ja,th      ; languages scored with CER
    overrides =                   ; per-language metric, e.g. de=cer,zh=wer
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..context import ORDER_NEAREST_LAST, ORDER_POLICIES
from ..errors import ConfigError

STRATEGY_KINDS = ("ticl", "random", "audio", "speaker")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    embedder: str = "hash-ngram"
    adapter_url: str | None = None
    index_path: str | None = None
    test_emb_path: str | None = None

    def label(self) -> str:
        if self.kind == "ticl":
            return f"ticl[{self.embedder}]"
        if self.kind in ("audio", "speaker"):
            return f"{self.kind}[{Path(self.index_path).stem}]" if self.index_path else self.kind
        return self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    pool_manifest: str
    test_manifest: str
    k_values: tuple[int, ...]
    strategy: StrategySpec
    pseudo_labeler: str
    pseudo_label_file: str | None
    backend: str
    backend_model: str
    template: str | None
    order_policy: str
    seed: int
    max_in_flight: int
    max_new_tokens: int
    norm_scheme: str
    cer_languages: tuple[str, ...]
    min_duration_s: float | None = None
    max_duration_s: float | None = None
    metric_overrides: dict[str, str] = field(default_factory=dict)

    def snapshot(self) -> dict:
        """Canonical JSON-able form; basis for content addressing."""
        return {
            "name": self.name,
            "pool_manifest": self.pool_manifest,
            "test_manifest": self.test_manifest,
            "k_values": list(self.k_values),
            "strategy": {
                "kind": self.strategy.kind,
                "embedder": self.strategy.embedder,
                "adapter_url": self.strategy.adapter_url,
                "index": self.strategy.index_path,
                "test_emb": self.strategy.test_emb_path,
            },
            "pseudo_labeler": self.pseudo_labeler,
            "pseudo_label_file": self.pseudo_label_file,
            "backend": self.backend,
            "backend_model": self.backend_model,
            "template": self.template,
            "order_policy": self.order_policy,
            "seed": self.seed,
            "max_in_flight": self.max_in_flight,
            "max_new_tokens": self.max_new_tokens,
            "norm_scheme": self.norm_scheme,
            "cer_languages": list(self.cer_languages),
            "metric_overrides": dict(sorted(self.metric_overrides.items())),
            "duration_filter": [self.min_duration_s, self.max_duration_s],
        }

    def content_hash(self) -> str:
        canon = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def parse_k_values(raw: str) -> tuple[int, ...]:
    try:
        values = [int(part) for part in raw.replace(" ", "").split(",") if part]
    except ValueError:
        raise ConfigError(f"k_values must be integers, got {raw!r}")
    if not values:
        raise ConfigError("k_values must be non-empty")
    if any(v < 0 for v in values):
        raise ConfigError(f"k_values must be non-negative, got {values}")
    deduped = sorted(set(values))
    if deduped != values:
        raise ConfigError(f"k_values must be sorted and unique, got {values}")
    return tuple(deduped)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    base = path.parent

    def resolve(value: str | None) -> str | None:
        if not value:
            return None
        return str((base / value).resolve()) if not Path(value).is_absolute() else value

    if "experiment" not in parser:
        raise ConfigError("config needs an [experiment] section")
    exp = parser["experiment"]
    for required in ("pool_manifest", "test_manifest", "k_values"):
        if not exp.get(required):
            raise ConfigError(f"[experiment] missing {required}")

    strategy_section = parser["strategy"] if "strategy" in parser else {}
    kind = strategy_section.get("kind", "ticl")
    if kind not in STRATEGY_KINDS:
        raise ConfigError(f"strategy kind must be one of {STRATEGY_KINDS}, got {kind!r}")
    strategy = StrategySpec(
        kind=kind,
        embedder=strategy_section.get("embedder", "hash-ngram"),
        adapter_url=strategy_section.get("adapter_url") or None,
        index_path=resolve(strategy_section.get("index")),
        test_emb_path=resolve(strategy_section.get("test_emb")),
    )

    labels_section = parser["pseudo_labels"] if "pseudo_labels" in parser else {}
    backend_section = parser["backend"] if "backend" in parser else {}
    metrics_section = parser["metrics"] if "metrics" in parser else {}

    order_policy = exp.get("order_policy", ORDER_NEAREST_LAST)
    if order_policy not in ORDER_POLICIES:
        raise ConfigError(f"order_policy must be one of {ORDER_POLICIES}, got {order_policy!r}")

    norm = metrics_section.get("norm", "basic")
    if norm not in ("basic", "none"):
        raise ConfigError(f"norm must be basic or none, got {norm!r}")

    metric_overrides: dict[str, str] = {}
    for pair in (metrics_section.get("overrides") or "").replace(" ", "").split(","):
        if not pair:
            continue
        lang, _, kind = pair.partition("=")
        if kind not in ("wer", "cer"):
            raise ConfigError(f"metric override must map to wer or cer, got {pair!r}")
        metric_overrides[lang.lower()] = kind

    def opt_float(section, key):
        raw = section.get(key) if section else None
        return float(raw) if raw else None

    config = ExperimentConfig(
        name=exp.get("name", path.stem),
        pool_manifest=resolve(exp["pool_manifest"]),
        test_manifest=resolve(exp["test_manifest"]),
        k_values=parse_k_values(exp["k_values"]),
        strategy=strategy,
        pseudo_labeler=labels_section.get("labeler", "unspecified"),
        pseudo_label_file=resolve(labels_section.get("file")),
        backend=backend_section.get("kind", "mock:echo-nearest"),
        backend_model=backend_section.get("model", ""),
        template=resolve(exp.get("template")),
        order_policy=order_policy,
        seed=int(exp.get("seed", "0")),
        max_in_flight=int(backend_section.get("max_in_flight", "4")),
        max_new_tokens=int(backend_section.get("max_new_tokens", "256")),
        norm_scheme=norm,
        cer_languages=tuple(
            part for part in metrics_section.get("cer_languages", "zh,ja,th").replace(" ", "").split(",") if part
        ),
        min_duration_s=opt_float(exp, "min_duration_s"),
        max_duration_s=opt_float(exp, "max_duration_s"),
        metric_overrides=metric_overrides,
    )
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    for label, file_path in (
        ("pool_manifest", config.pool_manifest),
        ("test_manifest", config.test_manifest),
        ("template", config.template),
        ("pseudo_label_file", config.pseudo_label_file),
        ("strategy index", config.strategy.index_path),
        ("strategy test_emb", config.strategy.test_emb_path),
    ):
        if file_path and not Path(file_path).exists():
            raise ConfigError(f"{label} does not exist: {file_path}")
    if config.strategy.kind == "ticl" and not config.pseudo_label_file:
        raise ConfigError("ticl strategy needs [pseudo_labels] file")
    if config.strategy.kind in ("audio", "speaker"):
        if not config.strategy.index_path or not config.strategy.test_emb_path:
            raise ConfigError(f"{config.strategy.kind} strategy needs index and test_emb files")
    if (config.min_duration_s is None) != (config.max_duration_s is None):
        raise ConfigError("duration filter needs both min_duration_s and max_duration_s")


def with_strategy(config: ExperimentConfig, strategy: StrategySpec) -> ExperimentConfig:
    return replace(config, strategy=strategy)
