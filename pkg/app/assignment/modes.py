"""Winner-takes-all joint mode assignment."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.assignment.interaction import InteractionSet, candidate_array
from app.core.errors import ValidationError
from app.model.outputs import MarginalPredictionSet, SceneHypothesis
from app.schemas.v1.common import AssignmentStrategy

Array = npt.NDArray[np.float64]
Mask = npt.NDArray[np.bool_]


@dataclass(frozen=True)
class ModeAssignment:
    m_star: int
    k_star: tuple[int | None, ...]  # None for agents without valid GT
    distances: Array  # (M,) ego distance per mode
    scores: Array  # (M,) the criterion minimized by the strategy
    strategy: AssignmentStrategy = AssignmentStrategy.EGO_CENTRIC


def masked_distance(
    pred: npt.ArrayLike, gt: npt.ArrayLike, valid: npt.ArrayLike | None = None
) -> float:
    """Mean Euclidean point error over valid steps."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    mask = np.ones(p.shape[0], dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if not mask.any():
        raise ValidationError("masked distance needs at least one valid step")
    return float(np.linalg.norm(p[mask] - g[mask], axis=-1).mean())


def best_candidates(
    marginal: MarginalPredictionSet | Array, agents_gt: Array, agents_valid: Mask
) -> tuple[int | None, ...]:
    """Per-agent index of the marginal candidate closest to that agent's GT."""
    candidates = candidate_array(marginal)
    out: list[int | None] = []
    for i in range(candidates.shape[0]):
        if not agents_valid[i].any():
            out.append(None)
            continue
        d = [masked_distance(c, agents_gt[i], agents_valid[i]) for c in candidates[i]]
        out.append(int(np.argmin(d)))
    return tuple(out)


def assign_modes(
    hyps: Sequence[SceneHypothesis],
    ego_gt_tp: Array,
    marginal: MarginalPredictionSet | Array,
    agents_gt: Array,
    agents_valid: Mask,
    interaction: InteractionSet,
    strategy: AssignmentStrategy = AssignmentStrategy.EGO_CENTRIC,
) -> ModeAssignment:
    """Pick the joint mode ``m*`` and per-agent marginal candidates ``k*``.

    Ego-centric assignment ranks modes by the ego plan alone; all-actor ranks
    them by the ego distance plus the distances of every supervised agent.
    Ties go to the lowest index.
    """
    if not hyps:
        raise ValidationError("mode assignment needs at least one hypothesis")
    ego = np.array([masked_distance(h.ego_traj, ego_gt_tp) for h in hyps])
    if strategy == AssignmentStrategy.ALL_ACTOR:
        supervised = [i for i in range(len(agents_valid)) if agents_valid[i].any()]
        agent_sums = [
            sum(
                masked_distance(h.agent_trajs[i], agents_gt[i], agents_valid[i])
                for i in supervised
            )
            for h in hyps
        ]
        scores = ego + np.array(agent_sums, dtype=np.float64)
    else:
        scores = ego
    return ModeAssignment(
        m_star=int(np.argmin(scores)),
        k_star=best_candidates(marginal, agents_gt, agents_valid),
        distances=ego,
        scores=scores,
        strategy=AssignmentStrategy(strategy),
    )
