"""Closed-loop evaluation over a scene set, with per-tag breakdowns."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import structlog

from app.core.errors import EvaluationError
from app.core.metrics import caad_episodes_total
from app.core.tracing import span
from app.model.network import CaadModel
from app.scene.types import SCRIPT_STEPS, Scene
from app.schemas.v1.common import PolicyMode
from app.schemas.v1.evaluation import (
    EpisodeRecord,
    ReportRecord,
    SummaryRecord,
    evaluation_header,
)
from app.simulator.episode import EpisodeResult, run_episode
from app.utils.records import atomic_write_bytes, read_numbered_records, write_records

logger = structlog.get_logger(__name__)

OVERALL = "overall"


@dataclass(frozen=True)
class AggregateMetrics:
    """Means over episodes; exact sums make them independent of episode order."""

    episodes: int
    success_rate: float
    collision_rate: float
    off_road_rate: float
    mean_progress: float
    driving_score: float

    @classmethod
    def of(cls, results: Sequence[EpisodeResult]) -> AggregateMetrics:
        n = len(results)
        if n == 0:
            raise EvaluationError("cannot aggregate an empty episode set")

        def mean(values: list[float]) -> float:
            return math.fsum(values) / n

        return cls(
            episodes=n,
            success_rate=mean([float(r.success) for r in results]),
            collision_rate=mean([float(r.collided) for r in results]),
            off_road_rate=mean([float(r.off_road) for r in results]),
            mean_progress=mean([r.progress_ratio for r in results]),
            driving_score=mean([r.driving_score for r in results]),
        )

    def to_record(self, group: str) -> SummaryRecord:
        return SummaryRecord(
            group=group,
            episodes=self.episodes,
            success_rate=self.success_rate,
            collision_rate=self.collision_rate,
            off_road_rate=self.off_road_rate,
            mean_progress=self.mean_progress,
            driving_score=self.driving_score,
        )


@dataclass(frozen=True)
class EvaluationReport:
    episodes: tuple[EpisodeResult, ...]
    overall: AggregateMetrics
    per_tag: dict[str, AggregateMetrics]

    def records(self) -> list[EpisodeRecord | SummaryRecord]:
        rows: list[EpisodeRecord | SummaryRecord] = [e.to_record() for e in self.episodes]
        rows.append(self.overall.to_record(OVERALL))
        rows.extend(metrics.to_record(tag) for tag, metrics in self.per_tag.items())
        return rows

    def to_csv(self) -> str:
        """Plot-ready summary: one row for the whole set, then one per scenario tag."""
        columns = ["group", *(f.name for f in fields(AggregateMetrics))]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for group, metrics in [(OVERALL, self.overall), *self.per_tag.items()]:
            writer.writerow([group, *(repr(getattr(metrics, c)) for c in columns[1:])])
        return buf.getvalue()


def evaluate(
    scenes: Sequence[Scene],
    model: CaadModel | None = None,
    *,
    mode: PolicyMode = PolicyMode.JOINT,
    horizon_steps: int = SCRIPT_STEPS,
    threads: int = 1,
) -> EvaluationReport:
    """Run one closed-loop episode per scene and aggregate overall and per scenario tag."""
    if not scenes:
        raise EvaluationError("evaluation needs at least one scene")

    def episode(scene: Scene) -> EpisodeResult:
        result = run_episode(scene, model, horizon_steps, mode)
        caad_episodes_total.labels(
            scenario_tag=scene.scenario_tag.value, outcome=result.outcome.value
        ).inc()
        return result

    with span("simulator.evaluate", scenes=len(scenes), mode=str(mode)):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = tuple(pool.map(episode, scenes))

    tags = sorted({r.scenario_tag.value for r in results})
    report = EvaluationReport(
        episodes=results,
        overall=AggregateMetrics.of(results),
        per_tag={
            tag: AggregateMetrics.of([r for r in results if r.scenario_tag.value == tag])
            for tag in tags
        },
    )
    logger.info(
        "evaluation_complete",
        episodes=report.overall.episodes,
        success_rate=report.overall.success_rate,
        driving_score=report.overall.driving_score,
        collision_rate=report.overall.collision_rate,
    )
    return report


def write_report(report: EvaluationReport, path: Path, csv_path: Path | None = None) -> None:
    write_records(Path(path), evaluation_header(), report.records())
    if csv_path is not None:
        atomic_write_bytes(Path(csv_path), report.to_csv().encode("utf-8"))


def load_report(path: Path) -> tuple[list[EpisodeRecord], dict[str, SummaryRecord]]:
    """Episode records and the summary records keyed by group."""
    episodes: list[EpisodeRecord] = []
    summaries: dict[str, SummaryRecord] = {}
    for _, row in read_numbered_records(Path(path), evaluation_header(), ReportRecord):
        if isinstance(row.root, SummaryRecord):
            summaries[row.root.group] = row.root
        else:
            episodes.append(row.root)
    return episodes, summaries
