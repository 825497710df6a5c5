"""Rigid planar transforms of scenes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.geometry.primitives import DrivablePolygon, Polyline, wrap_angles
from app.scene.types import AgentState, Poses, Scene


@dataclass(frozen=True)
class RigidTransform:
    """``p -> R(rotation) p + translation``; headings shift by ``rotation``."""

    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    @property
    def matrix(self) -> npt.NDArray[np.float64]:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply_points(self, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + np.asarray(self.translation)

    def apply_poses(self, poses: Poses) -> Poses:
        poses = np.asarray(poses, dtype=np.float64)
        xy = self.apply_points(poses[..., :2])
        heading = wrap_angles(poses[..., 2] + self.rotation)
        return np.concatenate([xy, heading[..., None]], axis=-1)

    def inverse(self) -> RigidTransform:
        back = -(self.matrix.T @ np.asarray(self.translation))
        return RigidTransform(rotation=-self.rotation, translation=(float(back[0]), float(back[1])))

    def compose(self, inner: RigidTransform) -> RigidTransform:
        """The transform applying ``inner`` first, then ``self``."""
        shifted = self.matrix @ np.asarray(inner.translation) + np.asarray(self.translation)
        return RigidTransform(
            rotation=self.rotation + inner.rotation,
            translation=(float(shifted[0]), float(shifted[1])),
        )


def _transform_agent(agent: AgentState, transform: RigidTransform) -> AgentState:
    return AgentState(
        id=agent.id,
        footprint=agent.footprint,
        history=transform.apply_poses(agent.history),
        future=transform.apply_poses(agent.future),
        future_valid=agent.future_valid,
        role=agent.role,
    )


def transform_scene(scene: Scene, transform: RigidTransform) -> Scene:
    return Scene(
        scene_id=scene.scene_id,
        seed=scene.seed,
        scenario_tag=scene.scenario_tag,
        ego=_transform_agent(scene.ego, transform),
        agents=tuple(_transform_agent(a, transform) for a in scene.agents),
        route=Polyline(transform.apply_points(scene.route.points)),
        drivable=DrivablePolygon(transform.apply_points(scene.drivable.vertices)),
        direction_field=tuple(
            Polyline(transform.apply_points(lane.points)) for lane in scene.direction_field
        ),
    )


def frame_at(x: float, y: float, heading: float) -> RigidTransform:
    """Transform taking world coordinates to the frame of the pose ``(x, y, heading)``."""
    to_origin = RigidTransform(translation=(-float(x), -float(y)))
    return RigidTransform(rotation=-float(heading)).compose(to_origin)


def ego_frame(scene: Scene) -> RigidTransform:
    pose = scene.ego.current_pose
    return frame_at(pose.x, pose.y, pose.heading)


def ego_frame_transform(scene: Scene) -> Scene:
    """Express every coordinate relative to the ego's current pose."""
    return transform_scene(scene, ego_frame(scene))
