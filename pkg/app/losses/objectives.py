"""Training objectives built from model outputs, targets and the mode assignment.

Joint terms follow the supervision partition: the ego and interaction agents
are supervised under the assigned joint mode, every other supervised agent
under its own best marginal candidate. Agents without valid GT never appear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.assignment.interaction import InteractionSet
from app.assignment.modes import ModeAssignment
from app.assignment.targets import SceneTargets
from app.core.errors import NumericError
from app.losses.functional import (
    DEFAULT_ALPHA,
    DEFAULT_GAMMA,
    focal_loss,
    gaussian_nll,
    l2_regression,
)
from app.model.outputs import JointPrediction, MarginalPredictionSet, ModelOutput
from app.numerics.tensor import Tensor


class LossWeights(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_joint: float = Field(default=1.0, ge=0.0)
    lambda_rl: float = Field(default=1.0, ge=0.0)
    focal_gamma: float = Field(default=DEFAULT_GAMMA, ge=0.0)
    focal_alpha: float = Field(default=DEFAULT_ALPHA, gt=0.0)


@dataclass(frozen=True)
class LossReport:
    e2e: float
    joint_reg: float
    joint_cls: float
    grpo: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "e2e": self.e2e,
            "joint_reg": self.joint_reg,
            "joint_cls": self.joint_cls,
            "grpo": self.grpo,
            "total": self.total,
        }


def _zero() -> Tensor:
    return Tensor(0.0)


def _sum(terms: list[Tensor]) -> Tensor:
    total = _zero()
    for term in terms:
        total = total + term
    return total


def _mean(terms: list[Tensor]) -> Tensor:
    return _sum(terms) * (1.0 / len(terms)) if terms else _zero()


def _marginal_partition(
    assignment: ModeAssignment, interaction: InteractionSet
) -> list[tuple[int, int]]:
    return [
        (i, k)
        for i, k in enumerate(assignment.k_star)
        if k is not None and i not in interaction
    ]


def _joint_members(assignment: ModeAssignment, interaction: InteractionSet) -> list[int]:
    return [i for i in interaction.indices if assignment.k_star[i] is not None]


def joint_cls_loss(
    joint: JointPrediction,
    marginal_logits: Tensor,
    assignment: ModeAssignment,
    interaction: InteractionSet,
    weights: LossWeights | None = None,
) -> Tensor:
    w = weights or LossWeights()
    m = assignment.m_star
    terms = [focal_loss(joint.ego_logits, m, w.focal_gamma, w.focal_alpha)]
    for i in _joint_members(assignment, interaction):
        terms.append(focal_loss(joint.agent_logits[i], m, w.focal_gamma, w.focal_alpha))
    for i, k in _marginal_partition(assignment, interaction):
        terms.append(focal_loss(marginal_logits[i], k, w.focal_gamma, w.focal_alpha))
    return _sum(terms)


def joint_reg_loss(
    joint: JointPrediction,
    marginal: MarginalPredictionSet,
    assignment: ModeAssignment,
    interaction: InteractionSet,
    targets: SceneTargets,
) -> Tensor:
    m = assignment.m_star
    terms = [gaussian_nll(joint.ego_mu[m], joint.ego_sigma[m], targets.ego_tp)]
    for i in _joint_members(assignment, interaction):
        pred = joint.agent_trajectories[i, m]
        terms.append(l2_regression(pred, targets.agents[i], targets.valid[i]))
    for i, k in _marginal_partition(assignment, interaction):
        pred = marginal.trajectories[i, k]
        terms.append(l2_regression(pred, targets.agents[i], targets.valid[i]))
    return _sum(terms)


@dataclass(frozen=True)
class E2ETerms:
    agent_reg: Tensor
    agent_cls: Tensor
    ego_temporal: Tensor
    ego_spatial: Tensor
    ego_spread: Tensor

    def total(self) -> Tensor:
        agents = self.agent_reg + self.agent_cls
        return agents + self.ego_temporal + self.ego_spatial + self.ego_spread


def e2e_terms(
    output: ModelOutput,
    targets: SceneTargets,
    k_star: tuple[int | None, ...],
    weights: LossWeights | None = None,
) -> E2ETerms:
    """Marginal objective: winner-takes-all agent regression and classification plus ego plans.

    The marginal ego spread is fitted by likelihood against the detached
    temporal plan residual, so the plan mean is shaped by L2 alone.
    """
    w = weights or LossWeights()
    trajs, logits = output.marginal.trajectories, output.marginal.logits
    supervised = [(i, k) for i, k in enumerate(k_star) if k is not None]
    reg = [l2_regression(trajs[i, k], targets.agents[i], targets.valid[i]) for i, k in supervised]
    cls = [focal_loss(logits[i], k, w.focal_gamma, w.focal_alpha) for i, k in supervised]
    plan = output.ego_plan
    return E2ETerms(
        agent_reg=_mean(reg),
        agent_cls=_mean(cls),
        ego_temporal=l2_regression(plan.temporal, targets.ego_tp),
        ego_spatial=l2_regression(plan.spatial, targets.ego_sp),
        ego_spread=gaussian_nll(plan.temporal.detach(), plan.sigma, targets.ego_tp),
    )


def e2e_loss(
    output: ModelOutput,
    targets: SceneTargets,
    k_star: tuple[int | None, ...],
    weights: LossWeights | None = None,
) -> Tensor:
    return e2e_terms(output, targets, k_star, weights).total()


def total_loss(
    e2e: Tensor,
    joint_reg: Tensor,
    joint_cls: Tensor,
    grpo: Tensor,
    weights: LossWeights,
) -> tuple[Tensor, LossReport]:
    """``e2e + lambda_joint (joint_reg + joint_cls) + lambda_rl grpo``."""
    total = e2e + (joint_reg + joint_cls) * weights.lambda_joint + grpo * weights.lambda_rl
    values = [float(t.data) for t in (e2e, joint_reg, joint_cls, grpo)]
    if not np.all(np.isfinite(values)):
        raise NumericError(
            "non-finite loss component",
            details=dict(zip(("e2e", "joint_reg", "joint_cls", "grpo"), values, strict=True)),
        )
    report = LossReport(
        e2e=values[0],
        joint_reg=values[1],
        joint_cls=values[2],
        grpo=values[3],
        total=values[0]
        + weights.lambda_joint * (values[1] + values[2])
        + weights.lambda_rl * values[3],
    )
    return total, report
