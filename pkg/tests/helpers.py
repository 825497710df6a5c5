"""Hand-built scenes shared by the test suites."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from app.geometry.primitives import DrivablePolygon, Footprint, Polyline
from app.scene.types import DT, EGO_ID, HISTORY_STEPS, SCRIPT_STEPS, AgentState, Scene
from app.schemas.v1.common import ScenarioTag

CAR = Footprint(4.5, 2.0)
ROAD = DrivablePolygon(np.array([[-300.0, -6.0], [300.0, -6.0], [300.0, 6.0], [-300.0, 6.0]]))


@dataclass(frozen=True)
class Mover:
    """Constant-velocity entity: position at t=0, heading and speed."""

    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0


def constant_velocity_agent(agent_id: str, mover: Mover, footprint: Footprint = CAR) -> AgentState:
    direction = np.array([math.cos(mover.heading), math.sin(mover.heading)])
    times = DT * np.arange(-(HISTORY_STEPS - 1), SCRIPT_STEPS + 1)
    xy = np.array([mover.x, mover.y]) + mover.speed * times[:, None] * direction
    poses = np.column_stack([xy, np.full(len(times), mover.heading)])
    return AgentState(
        id=agent_id,
        footprint=footprint,
        history=poses[:HISTORY_STEPS],
        future=poses[HISTORY_STEPS:],
        future_valid=np.ones(SCRIPT_STEPS, dtype=bool),
    )


def straight_scene(
    agents: list[Mover] | None = None,
    ego_speed: float = 8.0,
    scene_id: str = "fixture",
    tag: ScenarioTag = ScenarioTag.FREE_FLOW,
) -> Scene:
    """Ego at the origin heading +x on a 12 m wide straight road."""
    ego = constant_velocity_agent(EGO_ID, Mover(0.0, 0.0, 0.0, ego_speed))
    others = tuple(constant_velocity_agent(f"a{i}", m) for i, m in enumerate(agents or []))
    return Scene(
        scene_id=scene_id,
        seed=0,
        scenario_tag=tag,
        ego=ego,
        agents=others,
        route=Polyline(np.array([[0.0, 0.0], [25.0, 0.0], [50.0, 0.0]])),
        drivable=ROAD,
        direction_field=(
            Polyline(np.array([[-300.0, 0.0], [300.0, 0.0]])),
            Polyline(np.array([[300.0, 3.5], [-300.0, 3.5]])),
        ),
    )


def three_agent_scene() -> Scene:
    """Lead vehicle, oncoming vehicle and a follower behind the ego."""
    return straight_scene(
        [
            Mover(20.0, 0.0, 0.0, 8.0),
            Mover(60.0, 3.5, math.pi, 7.0),
            Mover(-15.0, 0.0, 0.0, 8.0),
        ],
        scene_id="three-agents",
    )
