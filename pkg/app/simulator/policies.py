"""Ego policies for closed-loop episodes.

A policy maps the current scene snapshot (world frame) to a planned pose
sequence; the episode executes the first pose and re-plans.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from app.core.errors import ConfigurationError
from app.model.network import CaadModel
from app.scene.kinematics import poses_from_points
from app.scene.transforms import ego_frame, transform_scene
from app.scene.types import FUTURE_STEPS, Poses, Scene
from app.schemas.v1.common import PolicyMode


class Policy(Protocol):
    mode: PolicyMode

    def plan(self, snapshot: Scene, step: int) -> Poses: ...


class ModelPolicy:
    """Follows the mean trajectory of the most probable ego joint mode.

    Marginal mode, or a network without joint heads, follows the marginal
    ego plan instead.
    """

    def __init__(self, model: CaadModel, mode: PolicyMode = PolicyMode.JOINT) -> None:
        self.model = model
        self.mode = mode

    def plan(self, snapshot: Scene, step: int) -> Poses:
        frame = ego_frame(snapshot)
        output = self.model.predict(transform_scene(snapshot, frame))
        if self.mode == PolicyMode.JOINT and output.joint is not None:
            best = int(np.argmax(output.joint.ego_logits.data))
            local = output.joint.ego_mu.data[best]
        else:
            local = output.ego_plan.temporal.data
        points = frame.inverse().apply_points(local)
        ego = snapshot.ego
        return poses_from_points(np.vstack([ego.position, points]), ego.heading)


class OraclePolicy:
    """Replays the ego's scripted future, holding the last scripted pose once it runs out."""

    mode = PolicyMode.ORACLE

    def __init__(self, scene: Scene) -> None:
        self.script = np.array(scene.ego.future)

    def plan(self, snapshot: Scene, step: int) -> Poses:
        rows = np.arange(step, step + FUTURE_STEPS)
        return self.script[np.minimum(rows, len(self.script) - 1)]


class StationaryPolicy:
    mode = PolicyMode.STATIONARY

    def plan(self, snapshot: Scene, step: int) -> Poses:
        pose = snapshot.ego.history[-1]
        return np.tile(pose, (FUTURE_STEPS, 1))


def make_policy(mode: PolicyMode, scene: Scene, model: CaadModel | None = None) -> Policy:
    mode = PolicyMode(mode)
    if mode == PolicyMode.ORACLE:
        return OraclePolicy(scene)
    if mode == PolicyMode.STATIONARY:
        return StationaryPolicy()
    if model is None:
        raise ConfigurationError(f"policy mode {mode.value} needs a trained model")
    return ModelPolicy(model, mode)
