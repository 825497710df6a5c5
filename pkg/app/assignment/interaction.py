"""Selection of the agents whose predicted futures conflict with the ego plan.

All coordinates are in the frame of the scene passed in; callers pair
ego-frame predictions with an ego-frame scene.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError
from app.geometry.ops import point_segment_distances
from app.model.outputs import MarginalPredictionSet
from app.scene.kinematics import INTERACTION_MARGIN, conflict_threshold
from app.scene.types import Scene
from app.schemas.v1.common import SelectionCue

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class InteractionEvidence:
    candidate: int
    distance: float
    threshold: float


@dataclass(frozen=True)
class InteractionSet:
    indices: tuple[int, ...]
    member_ids: tuple[str, ...]
    evidence: dict[str, InteractionEvidence] = field(default_factory=dict)

    def __contains__(self, index: object) -> bool:
        return index in self.indices

    def __len__(self) -> int:
        return len(self.indices)


def candidate_array(marginal: MarginalPredictionSet | Array) -> Array:
    if isinstance(marginal, MarginalPredictionSet):
        return marginal.trajectories.data
    return np.asarray(marginal, dtype=np.float64)


def _spatial_distances(candidates: Array, path: Array) -> Array:
    """Minimum point-to-path distance per candidate, shape ``(K,)``."""
    k, t, _ = candidates.shape
    d = point_segment_distances(candidates.reshape(-1, 2), path[:-1], path[1:]).min(axis=1)
    return d.reshape(k, t).min(axis=1)


def _temporal_distances(candidates: Array, ego_tp: Array) -> Array:
    return np.linalg.norm(candidates - ego_tp[None], axis=-1).min(axis=1)


def select_interaction_set(
    scene: Scene,
    marginal: MarginalPredictionSet | Array,
    ego_sp_gt: Array,
    threshold_margin: float = INTERACTION_MARGIN,
    *,
    cue: SelectionCue = SelectionCue.SPATIAL,
    ego_tp_gt: Array | None = None,
) -> InteractionSet:
    """Agents with at least one marginal candidate within conflict distance of the ego GT.

    The spatial cue measures point-to-path distance against the 2 m ego path;
    the temporal cue compares each candidate step with the time-aligned ego
    waypoint and needs ``ego_tp_gt``.
    """
    candidates = candidate_array(marginal)
    if candidates.shape[0] != scene.n_agents:
        raise ValidationError(
            "marginal predictions do not match the scene agents",
            details={"predicted": candidates.shape[0], "agents": scene.n_agents},
        )
    if cue == SelectionCue.TEMPORAL:
        if ego_tp_gt is None:
            raise ValidationError("temporal selection needs the GT ego temporal trajectory")
        reference = np.asarray(ego_tp_gt, dtype=np.float64)
    else:
        reference = np.asarray(ego_sp_gt, dtype=np.float64)

    indices: list[int] = []
    evidence: dict[str, InteractionEvidence] = {}
    for i, agent in enumerate(scene.agents):
        if cue == SelectionCue.TEMPORAL:
            dists = _temporal_distances(candidates[i], reference)
        else:
            dists = _spatial_distances(candidates[i], reference)
        threshold = conflict_threshold(scene.ego.footprint, agent.footprint, threshold_margin)
        best = int(np.argmin(dists))
        if dists[best] < threshold:
            indices.append(i)
            evidence[agent.id] = InteractionEvidence(best, float(dists[best]), threshold)
    return InteractionSet(
        indices=tuple(indices),
        member_ids=tuple(scene.agents[i].id for i in indices),
        evidence=evidence,
    )
