"""Multi-run sweeps built on run_experiment.

Every sweep shares the content-addressed index cache and keeps the
per-run manifests independent: a failure in one run is recorded and the
remaining runs proceed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import ConfigError
from .config import ExperimentConfig, StrategySpec
from .runner import RunManifest, _sanitize, run_experiment


@dataclass(frozen=True)
class SweepEntry:
    label: str
    manifest: RunManifest | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.manifest is not None


def _run_isolated(label: str, config: ExperimentConfig, run_dir: Path,
                  shared_dir: Path) -> SweepEntry:
    try:
        manifest = run_experiment(config, run_dir, shared_dir=shared_dir)
        return SweepEntry(label=label, manifest=manifest)
    except Exception as exc:  # noqa: BLE001 - per-run isolation boundary
        return SweepEntry(label=label, manifest=None, error=f"{type(exc).__name__}: {exc}")


def sweep_pseudo_labeler(
    base_config: ExperimentConfig,
    labelers: list[tuple[str, str]],
    work_dir: str | Path,
) -> list[SweepEntry]:
    """One run per (labeler id, pseudo-label file) at the base config's k values.

    Each manifest records that labeler's own pseudo-label error rate
    against the references alongside the end-to-end rates.
    """
    if not labelers:
        raise ConfigError("labeler sweep needs at least one labeler")
    root = Path(work_dir)
    shared = root / "shared"
    entries: list[SweepEntry] = []
    for labeler_id, label_file in labelers:
        run_config = replace(
            base_config,
            name=f"{base_config.name}-{labeler_id}",
            pseudo_labeler=labeler_id,
            pseudo_label_file=str(Path(label_file).resolve()),
        )
        entries.append(_run_isolated(
            labeler_id, run_config, root / "runs" / _sanitize(labeler_id), shared,
        ))
    return entries


def sweep_k(base_config: ExperimentConfig, k_values: tuple[int, ...],
            work_dir: str | Path) -> SweepEntry:
    """Rerun the base config over an alternate k grid (one manifest)."""
    run_config = replace(base_config, k_values=k_values)
    root = Path(work_dir)
    return _run_isolated(f"k-sweep:{base_config.name}", run_config, root / "runs" / "k-sweep",
                         root / "shared")


def compare_strategies(
    base_config: ExperimentConfig,
    strategies: list[StrategySpec],
    work_dir: str | Path,
) -> list[SweepEntry]:
    """Run several selection strategies against the same test set and backend."""
    if not strategies:
        raise ConfigError("strategy comparison needs at least one strategy")
    root = Path(work_dir)
    shared = root / "shared"
    entries: list[SweepEntry] = []
    for strategy in strategies:
        run_config = replace(base_config, strategy=strategy,
                             name=f"{base_config.name}-{strategy.label()}")
        entries.append(_run_isolated(
            strategy.label(), run_config, root / "runs" / _sanitize(strategy.label()), shared,
        ))
    return entries
