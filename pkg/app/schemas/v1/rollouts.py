"""Rollout and reward file schemas."""

from pydantic import BaseModel, Field

from app.schemas.v1.common import FileHeader

ROLLOUT_FORMAT = "caad-rollout"
REWARD_FORMAT = "caad-reward"
ROLLOUT_VERSION = 1
REWARD_VERSION = 1

Point = tuple[float, float]


def rollout_header() -> FileHeader:
    return FileHeader(format=ROLLOUT_FORMAT, version=ROLLOUT_VERSION)


def reward_header() -> FileHeader:
    return FileHeader(format=REWARD_FORMAT, version=REWARD_VERSION)


class RolloutRecord(BaseModel):
    """One candidate ego trajectory, in the coordinate frame of its scene file."""

    scene_id: str
    rollout_id: str = "0"
    points: list[Point] = Field(min_length=1)


class ComfortTermRecord(BaseModel):
    peak: float
    threshold: float
    delta: float
    alpha: float
    score: float


class RewardRecord(BaseModel):
    scene_id: str
    rollout_id: str
    reward: float
    nc: float
    dac: float
    dd: float
    ep: float
    ttc: float
    comfort: float
    d_opp: float
    t_ttc: int | None = None
    collided: bool = False
    at_fault: bool = False
    collision_time: float | None = None
    collision_agent: str | None = None
    comfort_terms: dict[str, ComfortTermRecord] = Field(default_factory=dict)
