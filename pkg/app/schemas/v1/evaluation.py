"""Closed-loop evaluation report schemas.

A report file holds one ``episode`` record per scene followed by ``summary``
records: one for the whole set and one per scenario tag.
"""

from typing import Annotated, Literal

from pydantic import BaseModel, Field, NonNegativeFloat, NonNegativeInt, RootModel

from app.schemas.v1.common import EpisodeOutcome, FileHeader, PolicyMode, ScenarioTag

EVALUATION_FORMAT = "caad-evaluation"
EVALUATION_VERSION = 1


def evaluation_header() -> FileHeader:
    return FileHeader(format=EVALUATION_FORMAT, version=EVALUATION_VERSION)


class EpisodeRecord(BaseModel):
    kind: Literal["episode"] = "episode"
    scene_id: str
    scenario_tag: ScenarioTag
    policy_mode: PolicyMode
    outcome: EpisodeOutcome
    success: bool
    collided: bool
    off_road: bool
    progress_ratio: NonNegativeFloat
    steps: NonNegativeInt
    comfort: float = Field(ge=0.0, le=1.0)
    driving_score: float = Field(ge=0.0, le=1.0)
    collision_agent: str | None = None


class SummaryRecord(BaseModel):
    kind: Literal["summary"] = "summary"
    group: str  # "overall" or a scenario tag
    episodes: NonNegativeInt
    success_rate: float = Field(ge=0.0, le=1.0)
    collision_rate: float = Field(ge=0.0, le=1.0)
    off_road_rate: float = Field(ge=0.0, le=1.0)
    mean_progress: NonNegativeFloat
    driving_score: float = Field(ge=0.0, le=1.0)


class ReportRecord(
    RootModel[Annotated[EpisodeRecord | SummaryRecord, Field(discriminator="kind")]]
):
    """Any line of an evaluation report."""
