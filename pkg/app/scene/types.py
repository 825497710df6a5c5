"""Scene domain model.

Poses are ``(x, y, heading)`` rows. History rows are spaced ``DT`` apart and
end at the current time; future rows start one ``DT`` after it. Only the first
``FUTURE_STEPS`` future rows are supervision targets; the remainder is the
scripted continuation used for oracle replay and background agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError
from app.geometry.ops import point_in_polygon, resample_chord
from app.geometry.primitives import DrivablePolygon, Footprint, Polyline, Pose2
from app.schemas.v1.common import ScenarioTag

DT = 0.5
HISTORY_STEPS = 4
FUTURE_STEPS = 8
SCRIPT_STEPS = 40
SPATIAL_POINTS = 10
SPATIAL_SPACING = 2.0
MAX_AGENTS = 16
ROUTE_START_TOLERANCE = 1.0

EGO_ID = "ego"

Poses = npt.NDArray[np.float64]
TrajectoryTP = npt.NDArray[np.float64]
TrajectorySP = npt.NDArray[np.float64]
Mask = npt.NDArray[np.bool_]


def validate_tp(traj: Any, steps: int = FUTURE_STEPS) -> TrajectoryTP:
    """Check a temporal trajectory: ``steps`` finite (x, y) points."""
    arr = np.asarray(traj, dtype=np.float64)
    if arr.shape != (steps, 2):
        raise ValidationError(
            f"temporal trajectory must have shape ({steps}, 2)", details={"shape": list(arr.shape)}
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("temporal trajectory contains non-finite values")
    return arr


def validate_sp(traj: Any, tolerance: float = 1e-6) -> TrajectorySP:
    """Check a spatial trajectory: P finite points 2 m apart (the final gap may be shorter)."""
    arr = np.asarray(traj, dtype=np.float64)
    if arr.shape != (SPATIAL_POINTS, 2) or not np.all(np.isfinite(arr)):
        raise ValidationError("spatial trajectory must be finite with shape (P, 2)")
    gaps = np.linalg.norm(np.diff(arr, axis=0), axis=1)
    interior_off = np.any(np.abs(gaps[:-1] - SPATIAL_SPACING) > tolerance)
    if interior_off or gaps[-1] > SPATIAL_SPACING + tolerance:
        raise ValidationError("spatial trajectory spacing deviates from 2 m")
    return arr


def _frozen(arr: Any, dtype: Any = np.float64) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class AgentState:
    id: str
    footprint: Footprint
    history: Poses
    future: Poses
    future_valid: Mask
    role: str = "vehicle"

    def __post_init__(self) -> None:
        history = _frozen(self.history)
        future = _frozen(self.future)
        valid = _frozen(self.future_valid, dtype=bool)
        if history.shape != (HISTORY_STEPS, 3):
            raise ValidationError(
                f"agent {self.id}: history must have shape ({HISTORY_STEPS}, 3)",
                details={"shape": list(history.shape)},
            )
        if future.ndim != 2 or future.shape[1] != 3 or future.shape[0] < FUTURE_STEPS:
            raise ValidationError(
                f"agent {self.id}: future must have at least {FUTURE_STEPS} rows of 3",
                details={"shape": list(future.shape)},
            )
        if valid.shape != (future.shape[0],):
            raise ValidationError(f"agent {self.id}: future_valid length mismatch")
        if not (np.all(np.isfinite(history)) and np.all(np.isfinite(future))):
            raise ValidationError(f"agent {self.id}: non-finite pose")
        object.__setattr__(self, "history", history)
        object.__setattr__(self, "future", future)
        object.__setattr__(self, "future_valid", valid)

    @property
    def current_pose(self) -> Pose2:
        x, y, h = self.history[-1]
        return Pose2(float(x), float(y), float(h))

    @property
    def position(self) -> npt.NDArray[np.float64]:
        return self.history[-1, :2]

    @property
    def heading(self) -> float:
        return float(self.history[-1, 2])

    @property
    def velocity(self) -> npt.NDArray[np.float64]:
        return (self.history[-1, :2] - self.history[-2, :2]) / DT

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))

    @property
    def gt_future(self) -> TrajectoryTP:
        return self.future[:FUTURE_STEPS, :2]

    @property
    def gt_poses(self) -> Poses:
        return self.future[:FUTURE_STEPS]

    @property
    def gt_valid(self) -> Mask:
        return self.future_valid[:FUTURE_STEPS]

    @property
    def supervised(self) -> bool:
        return bool(self.gt_valid.any())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AgentState):
            return NotImplemented
        return (
            self.id == other.id
            and self.footprint == other.footprint
            and self.role == other.role
            and np.array_equal(self.history, other.history)
            and np.array_equal(self.future, other.future)
            and np.array_equal(self.future_valid, other.future_valid)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SceneObservation:
    """What the policy sees at one instant: histories, footprints and map; no futures."""

    ego_history: Poses
    ego_footprint: Footprint
    agent_histories: Poses  # (N, H, 3)
    agent_footprints: tuple[Footprint, ...]
    route: Polyline
    drivable: DrivablePolygon

    @property
    def n_agents(self) -> int:
        return len(self.agent_footprints)


@dataclass(frozen=True, eq=False)
class Scene:
    scene_id: str
    seed: int
    scenario_tag: ScenarioTag
    ego: AgentState
    agents: tuple[AgentState, ...]
    route: Polyline
    drivable: DrivablePolygon
    direction_field: tuple[Polyline, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "direction_field", tuple(self.direction_field))
        object.__setattr__(self, "scenario_tag", ScenarioTag(self.scenario_tag))
        if len(self.agents) > MAX_AGENTS:
            raise ValidationError(
                f"scene {self.scene_id}: at most {MAX_AGENTS} agents",
                details={"agents": len(self.agents)},
            )
        if not point_in_polygon(self.ego.position, self.drivable):
            raise ValidationError(f"scene {self.scene_id}: ego starts outside the drivable area")
        offset = float(np.linalg.norm(self.route.start - self.ego.position))
        if offset > ROUTE_START_TOLERANCE:
            raise ValidationError(
                f"scene {self.scene_id}: route starts {offset:.3f} m from the ego",
                details={"offset": offset},
            )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def entities(self) -> tuple[AgentState, ...]:
        return (self.ego, *self.agents)

    def observation(self) -> SceneObservation:
        if self.agents:
            histories = np.stack([a.history for a in self.agents])
        else:
            histories = np.zeros((0, HISTORY_STEPS, 3))
        return SceneObservation(
            ego_history=self.ego.history,
            ego_footprint=self.ego.footprint,
            agent_histories=histories,
            agent_footprints=tuple(a.footprint for a in self.agents),
            route=self.route,
            drivable=self.drivable,
        )

    def ego_gt_spatial(self) -> TrajectorySP:
        """GT ego spatial trajectory: the scripted path from the current position at 2 m spacing."""
        return spatial_from_points(
            np.vstack([self.ego.position[None, :], self.ego.future[:, :2]]),
            heading=self.ego.heading,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.seed == other.seed
            and self.scenario_tag == other.scenario_tag
            and self.ego == other.ego
            and self.agents == other.agents
            and self.route == other.route
            and self.drivable == other.drivable
            and self.direction_field == other.direction_field
        )

    __hash__ = None  # type: ignore[assignment]


def spatial_from_points(points: Any, heading: float = 0.0) -> TrajectorySP:
    """``SPATIAL_POINTS`` points exactly 2 m apart along a path, extended straight when short.

    A path with no motion is extended along ``heading``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2 or np.all(np.linalg.norm(np.diff(pts, axis=0), axis=1) <= 1e-9):
        direction = np.array([np.cos(heading), np.sin(heading)])
        pts = np.vstack([pts[:1], pts[:1] + direction * SPATIAL_SPACING])
    return resample_chord(pts, SPATIAL_SPACING, SPATIAL_POINTS)
