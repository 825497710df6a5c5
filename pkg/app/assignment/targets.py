"""Ground-truth supervision targets of a scene."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.scene.types import FUTURE_STEPS, Scene

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class SceneTargets:
    ego_tp: Array  # (T, 2)
    ego_sp: Array  # (P, 2)
    agents: Array  # (N, T, 2)
    valid: npt.NDArray[np.bool_]  # (N, T)

    @property
    def supervised(self) -> npt.NDArray[np.bool_]:
        return self.valid.any(axis=1)


def scene_targets(scene: Scene) -> SceneTargets:
    if scene.agents:
        agents = np.stack([a.gt_future for a in scene.agents])
        valid = np.stack([a.gt_valid for a in scene.agents])
    else:
        agents = np.zeros((0, FUTURE_STEPS, 2))
        valid = np.zeros((0, FUTURE_STEPS), dtype=bool)
    return SceneTargets(
        ego_tp=np.array(scene.ego.gt_future),
        ego_sp=scene.ego_gt_spatial(),
        agents=agents,
        valid=valid,
    )
