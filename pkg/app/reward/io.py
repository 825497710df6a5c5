"""Rollout files in, reward files out."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import asdict
from pathlib import Path

import numpy as np
import structlog

from app.core.errors import ValidationError
from app.reward.scoring import RewardBreakdown, expert_rollout, score_rollout
from app.scene.types import Scene
from app.schemas.v1.rollouts import (
    ComfortTermRecord,
    RewardRecord,
    RolloutRecord,
    reward_header,
    rollout_header,
)
from app.utils.records import read_numbered_records, write_records

logger = structlog.get_logger(__name__)


def load_rollouts(path: Path) -> list[RolloutRecord]:
    rows = read_numbered_records(Path(path), rollout_header(), RolloutRecord)
    return [record for _, record in rows]


def save_rollouts(records: Iterable[RolloutRecord], path: Path) -> int:
    return write_records(Path(path), rollout_header(), records)


def expert_rollout_records(scenes: Sequence[Scene]) -> list[RolloutRecord]:
    """The GT ego future of every scene as a rollout named ``expert``."""
    return [
        RolloutRecord(scene_id=s.scene_id, rollout_id="expert", points=expert_rollout(s).tolist())
        for s in scenes
    ]


def reward_record(scene_id: str, rollout_id: str, breakdown: RewardBreakdown) -> RewardRecord:
    return RewardRecord(
        scene_id=scene_id,
        rollout_id=rollout_id,
        reward=breakdown.reward,
        nc=breakdown.nc,
        dac=breakdown.dac,
        dd=breakdown.dd,
        ep=breakdown.ep,
        ttc=breakdown.ttc,
        comfort=breakdown.comfort,
        d_opp=breakdown.d_opp,
        t_ttc=breakdown.t_ttc,
        collided=breakdown.collided,
        at_fault=breakdown.at_fault,
        collision_time=breakdown.collision_time,
        collision_agent=breakdown.collision_agent,
        comfort_terms={
            name: ComfortTermRecord(**asdict(term))
            for name, term in breakdown.comfort_terms.items()
        },
    )


def score_records(scenes: Sequence[Scene], rollouts: Sequence[RolloutRecord]) -> list[RewardRecord]:
    """Score each rollout against the scene it names; unknown scene ids are rejected up front."""
    by_id = {scene.scene_id: scene for scene in scenes}
    unknown = sorted({r.scene_id for r in rollouts} - set(by_id))
    if unknown:
        raise ValidationError("rollouts reference unknown scenes", details={"scene_ids": unknown})
    records = []
    for rollout in rollouts:
        breakdown = score_rollout(np.asarray(rollout.points), by_id[rollout.scene_id])
        records.append(reward_record(rollout.scene_id, rollout.rollout_id, breakdown))
    logger.info("rollouts_scored", count=len(records))
    return records


def save_rewards(records: Iterable[RewardRecord], path: Path) -> int:
    return write_records(Path(path), reward_header(), records)


def load_rewards(path: Path) -> list[RewardRecord]:
    rows = read_numbered_records(Path(path), reward_header(), RewardRecord)
    return [record for _, record in rows]
