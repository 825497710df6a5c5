"""Reward subscores for a candidate ego rollout.

A rollout is ``T`` future ego positions spaced ``DT`` apart, in the same frame
as the scene it is scored against. Headings come from the motion direction,
starting from the ego's current heading.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.geometry.ops import boxes_overlap, points_in_polygon, progress_along, project
from app.geometry.primitives import DrivablePolygon, Footprint, Polyline, wrap_angle, wrap_angles
from app.scene.kinematics import (
    CONTACT_GRID,
    first_contact,
    headings_from_points,
    poses_from_points,
)
from app.scene.types import DT, AgentState, Poses, Scene

Array = npt.NDArray[np.float64]

STATIONARY_SPEED = 0.1
REAR_CONE = math.pi / 4

DD_COMPLIANCE = 2.0
DD_VIOLATION = 6.0

TTC_HORIZON = 1.0
TTC_STEP = 0.1

EP_MIN_REFERENCE = 0.1

# metric -> threshold; the decay scale of each metric is half its threshold
COMFORT_THRESHOLDS: dict[str, float] = {
    "lon_accel": 2.40,
    "lon_decel": 4.05,
    "lat_accel": 4.89,
    "jerk": 8.37,
    "yaw_rate": 0.95,
    "yaw_accel": 1.93,
}
COMFORT_SCALE = 0.5


def with_origin(rollout: Array, entity: AgentState) -> Array:
    """The rollout with the entity's current position prepended, ``(T + 1, 2)``."""
    return np.vstack([entity.position[None, :], np.asarray(rollout, dtype=np.float64)])


def entity_poses(rollout: Array, entity: AgentState) -> Poses:
    """Current pose followed by the rollout with motion headings, ``(T + 1, 3)``."""
    future = poses_from_points(with_origin(rollout, entity), entity.heading)
    return np.vstack([entity.history[-1][None, :], future])


def ego_poses(rollout: Array, scene: Scene) -> Poses:
    return entity_poses(rollout, scene.ego)


def _gt_poses(agents: Sequence[AgentState], steps: int) -> list[Poses]:
    return [np.vstack([a.history[-1][None, :], a.future[:steps]]) for a in agents]


# -- no collision ------------------------------------------------------------


@dataclass(frozen=True)
class CollisionResult:
    score: float
    collided: bool
    at_fault: bool
    time: float | None = None
    agent_id: str | None = None


def _struck_from_behind(ego_pose: Array, other_pose: Array, speed: float) -> bool:
    if speed >= STATIONARY_SPEED:
        return False
    bearing = math.atan2(other_pose[1] - ego_pose[1], other_pose[0] - ego_pose[0])
    relative = wrap_angle(bearing - float(ego_pose[2]))
    return abs(wrap_angle(relative - math.pi)) <= REAR_CONE


def _speed_at(poses: Poses, time: float) -> float:
    speeds = np.linalg.norm(np.diff(poses[:, :2], axis=0), axis=1) / DT
    k = min(int(time // DT), len(speeds) - 1)
    return float(speeds[k])


def collision_against(
    poses: Poses,
    footprint: Footprint,
    others: Sequence[AgentState],
    grid: float = CONTACT_GRID,
) -> CollisionResult:
    """First contact of an entity's ``(T + 1, 3)`` poses with the GT futures of ``others``.

    Contact counts against the entity unless it is stationary and struck from
    behind; the score is 0 only for an at-fault contact. The earliest at-fault
    contact is reported when there is one, otherwise the earliest contact.
    """
    steps = len(poses) - 1
    first: CollisionResult | None = None
    for agent, other in zip(others, _gt_poses(others, steps), strict=True):
        contact = first_contact(poses, footprint, [other], [agent.footprint], DT, grid)
        if contact is None:
            continue
        at_fault = not _struck_from_behind(
            contact.ego_pose, contact.other_pose, _speed_at(poses, contact.time)
        )
        result = CollisionResult(0.0 if at_fault else 1.0, True, at_fault, contact.time, agent.id)
        if at_fault:
            if first is None or not first.at_fault or contact.time < first.time:
                first = result
        elif first is None or (not first.at_fault and contact.time < first.time):
            first = result
    return first or CollisionResult(1.0, False, False)


def score_nc(rollout: Array, scene: Scene, grid: float = CONTACT_GRID) -> CollisionResult:
    """Ego rollout against every agent's GT on a ``grid`` time lattice."""
    return collision_against(ego_poses(rollout, scene), scene.ego.footprint, scene.agents, grid)


# -- drivable area -------------------------------------------------------------


def score_dac(rollout: Array, drivable: DrivablePolygon) -> float:
    """Fraction of rollout steps whose footprint center stays on the drivable area."""
    inside = points_in_polygon(rollout, drivable)
    return 1.0 - float(np.count_nonzero(~inside)) / len(inside)


# -- driving direction -----------------------------------------------------------


def opposite_progress(points: Array, direction_field: tuple[Polyline, ...]) -> float:
    """Longest contiguous run of motion against the nearest centerline direction."""
    if not direction_field:
        return 0.0
    deltas = np.diff(points, axis=0)
    lengths = np.linalg.norm(deltas, axis=1)
    mids = 0.5 * (points[1:] + points[:-1])
    projections = [project(lane, mids) for lane in direction_field]
    distances = np.stack([p.distance for p in projections])
    nearest = np.argmin(distances, axis=0)
    tangents = np.stack([p.tangent for p in projections])[nearest, np.arange(len(mids))]
    against = np.einsum("kd,kd->k", deltas, tangents) < 0.0
    best = run = 0.0
    for length, opposite in zip(lengths, against, strict=True):
        if length <= 0.0:
            continue
        run = run + length if opposite else 0.0
        best = max(best, run)
    return float(best)


def dd_from_distance(d_opp: float) -> float:
    if d_opp <= DD_COMPLIANCE:
        return 1.0
    if d_opp >= DD_VIOLATION:
        return 0.0
    return 1.0 - (d_opp - DD_COMPLIANCE) / (DD_VIOLATION - DD_COMPLIANCE)


def score_dd(rollout: Array, scene: Scene) -> tuple[float, float]:
    """``(score, d_opp)`` for the rollout with the current position prepended."""
    d_opp = opposite_progress(with_origin(rollout, scene.ego), scene.direction_field)
    return dd_from_distance(d_opp), d_opp


# -- time to collision -----------------------------------------------------------


def _velocities(poses: Poses) -> Array:
    """Backward-difference velocity at every pose after the first."""
    return np.diff(poses[:, :2], axis=0) / DT


def score_ttc(
    rollout: Array, scene: Scene, horizon: float = TTC_HORIZON, step: float = TTC_STEP
) -> tuple[float, int | None]:
    """``(score, t_ttc)``: first step whose constant-velocity projection overlaps an agent."""
    ego = ego_poses(rollout, scene)
    steps = len(ego) - 1
    offsets = step * np.arange(int(round(horizon / step)) + 1)
    ego_v = _velocities(ego)
    agents = _gt_poses(scene.agents, steps)
    for k in range(1, steps + 1):
        ego_centers = ego[k, :2] + offsets[:, None] * ego_v[k - 1]
        for agent, poses in zip(scene.agents, agents, strict=True):
            v = (poses[k, :2] - poses[k - 1, :2]) / DT
            centers = poses[k, :2] + offsets[:, None] * v
            hits = boxes_overlap(
                ego_centers, ego[k, 2], scene.ego.footprint, centers, poses[k, 2], agent.footprint
            )
            if hits.any():
                return min(k, steps) / steps, k
    return 1.0, None


# -- comfort -----------------------------------------------------------------------


@dataclass(frozen=True)
class ComfortTerm:
    peak: float
    threshold: float
    delta: float
    alpha: float
    score: float


def comfort_metrics(points: Array, initial_heading: float) -> dict[str, Array]:
    """Finite-difference kinematics of a ``(T + 1, 2)`` point sequence."""
    v = np.diff(points, axis=0) / DT
    acc = np.diff(v, axis=0) / DT
    mean_v = 0.5 * (v[1:] + v[:-1])
    speed = np.linalg.norm(mean_v, axis=1)
    headings = headings_from_points(points, initial_heading)
    u = np.column_stack([np.cos(headings[1:]), np.sin(headings[1:])])
    moving = speed > 1e-9
    u[moving] = mean_v[moving] / speed[moving, None]
    lon = np.einsum("kd,kd->k", acc, u)
    lat = u[:, 0] * acc[:, 1] - u[:, 1] * acc[:, 0]
    yaw_rate = wrap_angles(np.diff(headings)) / DT
    return {
        "lon_accel": np.maximum(lon, 0.0),
        "lon_decel": np.maximum(-lon, 0.0),
        "lat_accel": np.abs(lat),
        "jerk": np.linalg.norm(np.diff(acc, axis=0), axis=1) / DT,
        "yaw_rate": np.abs(yaw_rate),
        "yaw_accel": np.abs(np.diff(yaw_rate)) / DT,
    }


def comfort_term(peak: float, threshold: float) -> ComfortTerm:
    alpha = COMFORT_SCALE * threshold
    delta = max(0.0, peak - threshold)
    return ComfortTerm(peak, threshold, delta, alpha, math.exp(-delta / alpha))


def entity_comfort(rollout: Array, entity: AgentState) -> tuple[float, dict[str, ComfortTerm]]:
    """``min_k exp(-delta_k / alpha_k)`` over the comfort metrics."""
    metrics = comfort_metrics(with_origin(rollout, entity), entity.heading)
    terms = {
        name: comfort_term(float(values.max()) if values.size else 0.0, COMFORT_THRESHOLDS[name])
        for name, values in metrics.items()
    }
    return min(t.score for t in terms.values()), terms


def score_comfort(rollout: Array, scene: Scene) -> tuple[float, dict[str, ComfortTerm]]:
    return entity_comfort(rollout, scene.ego)


# -- ego progress --------------------------------------------------------------------


def score_ep(rollout: Array, scene: Scene) -> float:
    """Route progress of the rollout relative to the GT ego future, clipped to [0, 1]."""
    start = progress_along(scene.route, scene.ego.position)
    achieved = progress_along(scene.route, np.asarray(rollout)[-1]) - start
    reference = progress_along(scene.route, scene.ego.gt_future[-1]) - start
    return float(np.clip(achieved / max(reference, EP_MIN_REFERENCE), 0.0, 1.0))
