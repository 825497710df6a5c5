"""Network output types.

Tensors stay attached to the tape so losses can differentiate through them;
``SceneHypothesis`` is the detached per-mode snapshot used by assignment,
sampling and the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.model.features import FeatureSet
from app.numerics.tensor import Tensor

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class MarginalEmbeddings:
    ego: Tensor  # (C,)
    agents: Tensor  # (N, C)


@dataclass(frozen=True)
class ModeStack:
    """Per-entity token sequences ``(E, 1 + M, C)``: slot 0 is the decoded embedding."""

    tokens: Tensor

    @property
    def modes(self) -> int:
        return self.tokens.shape[-2] - 1

    def decoded(self) -> Tensor:
        return self.tokens[..., 0, :]

    def mode_tokens(self) -> Tensor:
        return self.tokens[..., 1:, :]


@dataclass(frozen=True)
class MarginalPredictionSet:
    trajectories: Tensor  # (N, K, T, 2)
    logits: Tensor  # (N, K)

    @property
    def candidates(self) -> int:
        return self.logits.shape[-1]


@dataclass(frozen=True)
class EgoPlan:
    """Marginal ego plan: temporal waypoints, 2 m spatial path and a Gaussian spread."""

    temporal: Tensor  # (T, 2)
    spatial: Tensor  # (P, 2)
    sigma: Tensor  # (T, 2)


@dataclass(frozen=True)
class JointPrediction:
    ego_mu: Tensor  # (M, T, 2)
    ego_sigma: Tensor  # (M, T, 2)
    ego_logits: Tensor  # (M,)
    agent_trajectories: Tensor  # (N, M, T, 2)
    agent_logits: Tensor  # (N, M)

    @property
    def modes(self) -> int:
        return self.ego_logits.shape[0]


@dataclass(frozen=True)
class SceneHypothesis:
    mode_index: int
    ego_traj: Array  # (T, 2) mean
    ego_sigma: Array  # (T, 2)
    agent_trajs: Array  # (N, T, 2)
    ego_mode_logit: float
    agent_mode_logits: Array  # (N,)


@dataclass(frozen=True)
class ModelOutput:
    embeddings: MarginalEmbeddings
    marginal: MarginalPredictionSet
    ego_plan: EgoPlan
    joint: JointPrediction | None
    features: FeatureSet

    def hypotheses(self) -> list[SceneHypothesis]:
        if self.joint is None:
            return []
        j = self.joint
        return [
            SceneHypothesis(
                mode_index=m,
                ego_traj=j.ego_mu.data[m].copy(),
                ego_sigma=j.ego_sigma.data[m].copy(),
                agent_trajs=j.agent_trajectories.data[:, m].copy(),
                ego_mode_logit=float(j.ego_logits.data[m]),
                agent_mode_logits=j.agent_logits.data[:, m].copy(),
            )
            for m in range(j.modes)
        ]

    def marginal_hypothesis(self) -> SceneHypothesis:
        """The marginal ego plan as a single hypothesis (agents at their top candidate)."""
        trajs = self.marginal.trajectories.data
        best = np.argmax(self.marginal.logits.data, axis=1) if trajs.shape[0] else np.zeros(0, int)
        return SceneHypothesis(
            mode_index=0,
            ego_traj=self.ego_plan.temporal.data.copy(),
            ego_sigma=self.ego_plan.sigma.data.copy(),
            agent_trajs=trajs[np.arange(trajs.shape[0]), best].copy(),
            ego_mode_logit=0.0,
            agent_mode_logits=np.zeros(trajs.shape[0]),
        )
