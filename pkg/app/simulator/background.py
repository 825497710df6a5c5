"""Background traffic for closed-loop episodes.

Each agent replays its scripted future; once the script runs out it keeps
its lane heading and follows the ego when the ego is ahead of it in its
corridor. Agents never react to each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from app.geometry.primitives import Footprint
from app.scene.generator import IdmParams
from app.scene.kinematics import INTERACTION_MARGIN
from app.scene.types import DT, AgentState

Array = npt.NDArray[np.float64]

FOLLOW_HEADWAY = 2.0
MAX_DECEL = 4.0
MIN_DESIRED_SPEED = 1.0
LOOKAHEAD = 60.0


@dataclass(frozen=True)
class Leader:
    """The ego as seen from a following agent."""

    gap: float
    closing_speed: float


def leader_ahead(
    pose: Array,
    footprint: Footprint,
    speed: float,
    ego_pose: Array,
    ego_footprint: Footprint,
    ego_speed: float,
) -> Leader | None:
    """The ego when it sits ahead of ``pose`` within the agent's corridor, else None."""
    heading = float(pose[2])
    forward = np.array([np.cos(heading), np.sin(heading)])
    offset = ego_pose[:2] - pose[:2]
    lon = float(offset @ forward)
    lat = float(forward[0] * offset[1] - forward[1] * offset[0])
    corridor = footprint.half_width + ego_footprint.half_width + INTERACTION_MARGIN
    if lon <= 0.0 or lon > LOOKAHEAD or abs(lat) >= corridor:
        return None
    gap = lon - footprint.half_length - ego_footprint.half_length
    ego_along = ego_speed * float(np.cos(float(ego_pose[2]) - heading))
    return Leader(gap=gap, closing_speed=speed - ego_along)


def follow_params(desired_speed: float) -> IdmParams:
    return IdmParams(
        desired_speed=max(desired_speed, MIN_DESIRED_SPEED),
        time_headway=FOLLOW_HEADWAY,
        max_decel=MAX_DECEL,
    )


@dataclass
class BackgroundAgent:
    """Mutable closed-loop state of one scene agent."""

    agent: AgentState
    poses: list[Array] = field(default_factory=list)
    speed: float = 0.0
    desired_speed: float = 0.0

    @classmethod
    def start(cls, agent: AgentState) -> BackgroundAgent:
        return cls(agent=agent, poses=[row.copy() for row in agent.history], speed=agent.speed)

    @property
    def pose(self) -> Array:
        return self.poses[-1]

    @property
    def history(self) -> Array:
        return np.array(self.poses[-len(self.agent.history) :])

    def advance(
        self, step: int, ego_pose: Array, ego_footprint: Footprint, ego_speed: float
    ) -> Array:
        """Move to the pose at time ``(step + 1) * DT``."""
        script = self.agent.future
        if step < len(script):
            new = np.array(script[step])
            self.speed = float(np.linalg.norm(new[:2] - self.pose[:2])) / DT
            self.desired_speed = self.speed
        else:
            new = self._follow(ego_pose, ego_footprint, ego_speed)
        self.poses.append(new)
        return new

    def _follow(self, ego_pose: Array, ego_footprint: Footprint, ego_speed: float) -> Array:
        pose = self.pose
        leader = leader_ahead(
            pose, self.agent.footprint, self.speed, ego_pose, ego_footprint, ego_speed
        )
        params = follow_params(self.desired_speed)
        if leader is None:
            accel = params.acceleration(self.speed, None, 0.0)
        else:
            accel = params.acceleration(self.speed, leader.gap, leader.closing_speed)
        self.speed = max(self.speed + accel * DT, 0.0)
        heading = float(pose[2])
        step = self.speed * DT * np.array([np.cos(heading), np.sin(heading)])
        return np.array([pose[0] + step[0], pose[1] + step[1], heading])
