"""Per-epoch training metrics and their CSV export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from app.core.errors import CheckpointError, NumericError, ValidationError
from app.utils.records import atomic_write_bytes


@dataclass(frozen=True)
class EpochMetrics:
    stage: int
    epoch: int
    e2e: float
    joint_reg: float
    joint_cls: float
    grpo: float
    total: float
    mean_group_reward: float
    collision_rate: float
    ego_min_ade: float
    interaction_size: float
    optimizer_steps: int

    def as_row(self) -> dict[str, Any]:
        return asdict(self)


METRIC_COLUMNS = tuple(f.name for f in fields(EpochMetrics))


def _cell(value: Any) -> str:
    # repr round-trips float64 exactly
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class RunMetrics:
    rows: list[EpochMetrics] = field(default_factory=list)

    def append(self, row: EpochMetrics) -> None:
        if not all(math.isfinite(v) for v in asdict(row).values()):
            raise NumericError(f"non-finite metrics for epoch {row.epoch}", details=row.as_row())
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValidationError(
                "epochs must be strictly increasing", details={"epoch": row.epoch}
            )
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in self.rows:
            writer.writerow([_cell(getattr(row, name)) for name in METRIC_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path: Path) -> None:
        atomic_write_bytes(Path(path), self.to_csv().encode("utf-8"))

    def to_records(self) -> list[dict[str, Any]]:
        return [row.as_row() for row in self.rows]

    @classmethod
    def from_records(cls, records: list[dict[str, Any]]) -> RunMetrics:
        try:
            return cls(rows=[EpochMetrics(**r) for r in records])
        except TypeError as e:
            raise CheckpointError("checkpoint metrics history is malformed") from e
