"""Scene file schemas."""

from typing import Literal

from pydantic import BaseModel, Field, PositiveFloat

from app.schemas.v1.common import FileHeader, ScenarioTag

SCENE_FORMAT = "caad-scene"
SCENE_VERSION = 1

Point = tuple[float, float]
PoseRow = tuple[float, float, float]


def scene_header() -> FileHeader:
    return FileHeader(format=SCENE_FORMAT, version=SCENE_VERSION)


class FootprintRecord(BaseModel):
    length: PositiveFloat
    width: PositiveFloat


class AgentRecord(BaseModel):
    id: str
    footprint: FootprintRecord
    history: list[PoseRow]
    future: list[PoseRow]
    future_valid: list[bool]
    role: Literal["vehicle"] = "vehicle"


class SceneRecord(BaseModel):
    scene_id: str
    seed: int
    scenario_tag: ScenarioTag
    ego: AgentRecord
    agents: list[AgentRecord] = Field(default_factory=list, max_length=16)
    route: list[Point] = Field(min_length=2)
    drivable: list[Point] = Field(min_length=3)
    direction_field: list[list[Point]] = Field(default_factory=list)
