"""Scene files: ``caad-scene`` v1 line-delimited records."""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

import structlog
from pydantic import ValidationError as PydanticValidationError

from app.core.errors import CaadError, ParseError
from app.geometry.primitives import DrivablePolygon, Footprint, Polyline
from app.schemas.v1.scenes import (
    AgentRecord,
    FootprintRecord,
    SceneRecord,
    scene_header,
)
from app.scene.types import AgentState, Scene
from app.utils.records import read_numbered_records, write_records

logger = structlog.get_logger(__name__)


def agent_to_record(agent: AgentState) -> AgentRecord:
    return AgentRecord(
        id=agent.id,
        footprint=FootprintRecord(length=agent.footprint.length, width=agent.footprint.width),
        history=agent.history.tolist(),
        future=agent.future.tolist(),
        future_valid=agent.future_valid.tolist(),
        role=agent.role,
    )


def scene_to_record(scene: Scene) -> SceneRecord:
    return SceneRecord(
        scene_id=scene.scene_id,
        seed=scene.seed,
        scenario_tag=scene.scenario_tag,
        ego=agent_to_record(scene.ego),
        agents=[agent_to_record(a) for a in scene.agents],
        route=scene.route.points.tolist(),
        drivable=scene.drivable.vertices.tolist(),
        direction_field=[lane.points.tolist() for lane in scene.direction_field],
    )


def agent_from_record(record: AgentRecord) -> AgentState:
    return AgentState(
        id=record.id,
        footprint=Footprint(record.footprint.length, record.footprint.width),
        history=record.history,
        future=record.future,
        future_valid=record.future_valid,
        role=record.role,
    )


def scene_from_record(record: SceneRecord) -> Scene:
    return Scene(
        scene_id=record.scene_id,
        seed=record.seed,
        scenario_tag=record.scenario_tag,
        ego=agent_from_record(record.ego),
        agents=tuple(agent_from_record(a) for a in record.agents),
        route=Polyline(record.route),
        drivable=DrivablePolygon(record.drivable),
        direction_field=tuple(Polyline(lane) for lane in record.direction_field),
    )


def save_scenes(scenes: Iterable[Scene], path: Path) -> int:
    count = write_records(Path(path), scene_header(), (scene_to_record(s) for s in scenes))
    logger.info("scenes_saved", path=str(path), count=count)
    return count


def load_scenes(path: Path) -> list[Scene]:
    """Load scenes in file order; domain violations are reported with their line number."""
    scenes: list[Scene] = []
    for line_number, record in read_numbered_records(Path(path), scene_header(), SceneRecord):
        try:
            scenes.append(scene_from_record(record))
        except (CaadError, PydanticValidationError) as exc:
            message = exc.message if isinstance(exc, CaadError) else str(exc)
            raise ParseError(f"invalid scene {record.scene_id}: {message}", line_number) from exc
    logger.info("scenes_loaded", path=str(path), count=len(scenes))
    return scenes
