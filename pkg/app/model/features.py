"""Ego-frame input features for the network.

Everything the model sees is expressed in the ego's current frame, so the
network is invariant to where a scene sits in the world. ``FeatureSet.frame``
maps world coordinates into that frame; its inverse maps predictions back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.geometry.ops import (
    interpolate_at,
    point_segment_distances,
    points_in_polygon,
    progress_along,
)
from app.geometry.primitives import Footprint
from app.scene.transforms import RigidTransform, frame_at
from app.scene.types import DT, FUTURE_STEPS, Scene, SceneObservation

POSITION_SCALE = 10.0
SPEED_SCALE = 10.0
ROUTE_SAMPLES = 8
ROUTE_STEP = 6.0
CLEARANCE_SCALE = 5.0

ENTITY_FEATURES = 4 * 4 + 2 + 2
MAP_FEATURES = 2 * ROUTE_SAMPLES + ROUTE_SAMPLES + 1

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class FeatureSet:
    entities: Array  # (1 + N, ENTITY_FEATURES); row 0 is the ego
    map: Array  # (MAP_FEATURES,)
    anchors: Array  # (1 + N, FUTURE_STEPS, 2) constant-velocity extrapolation
    current: Array  # (1 + N, 3) current poses
    footprints: tuple[Footprint, ...]
    frame: RigidTransform

    @property
    def n_agents(self) -> int:
        return self.entities.shape[0] - 1


def _entity_features(history: Array, footprint: Footprint) -> Array:
    xy = history[:, :2] / POSITION_SCALE
    heading = history[:, 2]
    per_step = np.column_stack([xy, np.cos(heading), np.sin(heading)]).reshape(-1)
    velocity = (history[-1, :2] - history[-2, :2]) / DT / SPEED_SCALE
    size = np.array([footprint.length / 5.0, footprint.width / 2.0])
    return np.concatenate([per_step, velocity, size])


def _anchor(history: Array) -> Array:
    velocity = (history[-1, :2] - history[-2, :2]) / DT
    steps = DT * np.arange(1, FUTURE_STEPS + 1)
    return history[-1, :2] + steps[:, None] * velocity


def _map_features(obs: SceneObservation, frame: RigidTransform) -> Array:
    """Route samples ahead of the ego, their signed drivable clearance and the remaining length."""
    start = progress_along(obs.route, obs.ego_history[-1, :2])
    world = interpolate_at(obs.route, start + ROUTE_STEP * np.arange(ROUTE_SAMPLES))
    starts, ends = obs.drivable.edges
    clearance = point_segment_distances(world, starts, ends).min(axis=1)
    signed = np.where(points_in_polygon(world, obs.drivable), clearance, -clearance)
    samples = frame.apply_points(world) / POSITION_SCALE
    remaining = (obs.route.length - start) / 50.0
    return np.concatenate([samples.reshape(-1), signed / CLEARANCE_SCALE, [remaining]])


def build_features(obs: SceneObservation) -> FeatureSet:
    ego = obs.ego_history
    frame = frame_at(*ego[-1])
    histories = [frame.apply_poses(ego)] + [frame.apply_poses(h) for h in obs.agent_histories]
    footprints = (obs.ego_footprint, *obs.agent_footprints)
    entities = np.stack(
        [_entity_features(h, fp) for h, fp in zip(histories, footprints, strict=True)]
    )
    return FeatureSet(
        entities=entities,
        map=_map_features(obs, frame),
        anchors=np.stack([_anchor(h) for h in histories]),
        current=np.stack([h[-1] for h in histories]),
        footprints=footprints,
        frame=frame,
    )


def scene_features(scene: Scene) -> FeatureSet:
    return build_features(scene.observation())
