"""Component-ablation grid: train each preset, evaluate closed loop, tabulate.

Preset letters:

  base   marginal prediction only
  A      marginal prediction + policy alignment on the marginal plan
  B      temporal interaction cue + joint modes + ego-centric assignment
  C      spatial cue + joint modes + all-actor assignment
  D      spatial cue + joint modes + ego-centric assignment
  E      D + policy alignment
  E-all  E with every agent aligned alongside the ego
"""

from __future__ import annotations

import csv
import io
import statistics
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import structlog

from app.core.errors import ConfigurationError
from app.model.checkpoint import load_checkpoint, restore_model
from app.scene.types import Scene
from app.schemas.v1.common import (
    AlignmentScope,
    AlignmentTarget,
    AssignmentStrategy,
    PolicyMode,
    SelectionCue,
)
from app.simulator.evaluation import EvaluationReport, evaluate, write_report
from app.trainer.config import TrainConfig
from app.trainer.loop import train
from app.utils.records import atomic_write_bytes

logger = structlog.get_logger(__name__)

ABLATION_CSV = "ablation.csv"
SUMMARY_CSV = "summary.csv"


@dataclass(frozen=True)
class Preset:
    name: str
    joint: bool
    align: bool
    cue: SelectionCue = SelectionCue.SPATIAL
    assignment: AssignmentStrategy = AssignmentStrategy.EGO_CENTRIC
    scope: AlignmentScope = AlignmentScope.EGO

    @property
    def policy_mode(self) -> PolicyMode:
        return PolicyMode.JOINT if self.joint else PolicyMode.MARGINAL

    def apply(self, config: TrainConfig, seed: int) -> TrainConfig:
        """``config`` with this preset's component toggles and ``seed`` applied."""
        schedule = config.schedule
        if not self.align:
            schedule = schedule.model_copy(update={"stage3": 0})
        target = AlignmentTarget.JOINT if self.joint else AlignmentTarget.MARGINAL
        return config.model_copy(
            update={
                "seed": seed,
                "model": config.model.model_copy(update={"seed": seed}),
                "schedule": schedule,
                "joint_enabled": self.joint,
                "selection_cue": self.cue,
                "assignment": self.assignment,
                "grpo": config.grpo.model_copy(update={"scope": self.scope, "target": target}),
            }
        )


PRESETS: dict[str, Preset] = {
    "base": Preset("base", joint=False, align=False),
    "A": Preset("A", joint=False, align=True),
    "B": Preset("B", joint=True, align=False, cue=SelectionCue.TEMPORAL),
    "C": Preset("C", joint=True, align=False, assignment=AssignmentStrategy.ALL_ACTOR),
    "D": Preset("D", joint=True, align=False),
    "E": Preset("E", joint=True, align=True),
    "E-all": Preset("E-all", joint=True, align=True, scope=AlignmentScope.ALL_AGENTS),
}


def resolve_presets(names: Sequence[str]) -> list[Preset]:
    unknown = [n for n in names if n not in PRESETS]
    if unknown:
        raise ConfigurationError(
            f"unknown ablation presets: {', '.join(unknown)}", details={"known": list(PRESETS)}
        )
    return [PRESETS[n] for n in dict.fromkeys(names)]


@dataclass(frozen=True)
class AblationRun:
    preset: str
    seed: int
    report: EvaluationReport

    @property
    def success_rate(self) -> float:
        return self.report.overall.success_rate

    @property
    def driving_score(self) -> float:
        return self.report.overall.driving_score


@dataclass(frozen=True)
class AblationResult:
    runs: tuple[AblationRun, ...]

    def median_success(self, preset: str) -> float:
        return statistics.median(r.success_rate for r in self.runs if r.preset == preset)

    def median_driving_score(self, preset: str) -> float:
        return statistics.median(r.driving_score for r in self.runs if r.preset == preset)

    def presets(self) -> list[str]:
        return list(dict.fromkeys(r.preset for r in self.runs))

    def runs_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["preset", "seed", "success_rate", "collision_rate", "driving_score"])
        for r in self.runs:
            overall = r.report.overall
            writer.writerow(
                [
                    r.preset,
                    r.seed,
                    repr(overall.success_rate),
                    repr(overall.collision_rate),
                    repr(overall.driving_score),
                ]
            )
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["preset", "seeds", "median_success_rate", "median_driving_score"])
        for preset in self.presets():
            seeds = sum(1 for r in self.runs if r.preset == preset)
            writer.writerow(
                [
                    preset,
                    seeds,
                    repr(self.median_success(preset)),
                    repr(self.median_driving_score(preset)),
                ]
            )
        return buf.getvalue()


def run_ablation(
    config: TrainConfig,
    presets: Sequence[Preset],
    seeds: Sequence[int],
    train_scenes: Sequence[Scene],
    eval_scenes: Sequence[Scene],
    out_dir: Path,
    *,
    threads: int = 1,
) -> AblationResult:
    """Train and evaluate every preset under every seed.

    Each run writes its checkpoint, training metrics and evaluation report
    under ``out_dir/<preset>/seed<seed>/``; the per-run table and the
    per-preset medians go to ``ablation.csv`` and ``summary.csv``.
    """
    if not seeds:
        raise ConfigurationError("ablation needs at least one seed")
    out_dir = Path(out_dir)
    runs: list[AblationRun] = []
    for preset in presets:
        for seed in seeds:
            run_dir = out_dir / preset.name / f"seed{seed}"
            logger.info("ablation_run_started", preset=preset.name, seed=seed)
            trained = train(
                preset.apply(config, seed), run_dir, scenes=train_scenes, threads=threads
            )
            model = restore_model(load_checkpoint(trained.checkpoint))
            report = evaluate(eval_scenes, model, mode=preset.policy_mode, threads=threads)
            write_report(report, run_dir / "evaluation.jsonl", run_dir / "evaluation.csv")
            runs.append(AblationRun(preset=preset.name, seed=seed, report=report))
            logger.info(
                "ablation_run_complete",
                preset=preset.name,
                seed=seed,
                success_rate=report.overall.success_rate,
                driving_score=report.overall.driving_score,
            )

    result = AblationResult(runs=tuple(runs))
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(out_dir / ABLATION_CSV, result.runs_csv().encode("utf-8"))
    atomic_write_bytes(out_dir / SUMMARY_CSV, result.summary_csv().encode("utf-8"))
    return result
