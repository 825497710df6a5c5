"""Causality-aware policy alignment over a batch of scenes.

For every scene and policy mode a group of ego rollouts is sampled from the
model's Gaussian plan, scored against the agents' GT futures, normalized into
truncated advantages and folded into one clipped objective. Only ego outputs
enter the objective in ego scope, so agent heads receive no gradient from it.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import structlog

from app.core.errors import RewardValidationError
from app.core.metrics import (
    caad_groups_skipped_total,
    caad_rollouts_dropped_total,
    caad_rollouts_scored_total,
)
from app.core.tracing import span
from app.grpo.config import GrpoConfig
from app.grpo.objective import clipped_surrogate
from app.grpo.rollouts import RolloutGroup, gaussian_logp, sample_trajectories
from app.model.network import CaadModel
from app.model.outputs import ModelOutput
from app.numerics import functional as F
from app.numerics.tensor import Tensor
from app.reward.scoring import RewardBreakdown, score_agent_rollout, score_rollout
from app.scene.transforms import ego_frame_transform
from app.scene.types import EGO_ID, Scene
from app.schemas.v1.common import AlignmentScope, AlignmentTarget

logger = structlog.get_logger(__name__)

Scorer = Callable[[np.ndarray, Scene], RewardBreakdown]


@dataclass(frozen=True)
class _Policy:
    scene_index: int
    agent_index: int | None
    group: RolloutGroup
    mu: Tensor
    sigma: Tensor

    @property
    def scope(self) -> str:
        return "ego" if self.agent_index is None else "agent"


@dataclass(frozen=True)
class AlignmentResult:
    loss: Tensor
    groups: tuple[RolloutGroup, ...]
    scored: int
    dropped: int
    skipped: int

    def ego_groups(self) -> list[RolloutGroup]:
        return [g for g in self.groups if g.entity_id == EGO_ID]

    @property
    def mean_reward(self) -> float:
        rewards = [g.rewards for g in self.ego_groups() if g.rewards is not None]
        return float(np.concatenate(rewards).mean()) if rewards else 0.0

    @property
    def collision_rate(self) -> float:
        flags = [g.collided for g in self.ego_groups() if g.collided is not None]
        return float(np.concatenate(flags).mean()) if flags else 0.0


def ego_policies(output: ModelOutput, target: AlignmentTarget) -> list[tuple[int, Tensor, Tensor]]:
    """``(mode, mu, sigma)`` per ego policy; the marginal plan when no joint head exists."""
    if target == AlignmentTarget.JOINT and output.joint is not None:
        j = output.joint
        return [(m, j.ego_mu[m], j.ego_sigma[m]) for m in range(j.modes)]
    return [(0, output.ego_plan.temporal, output.ego_plan.sigma)]


def agent_policies(output: ModelOutput, scene: Scene) -> list[tuple[int, int, Tensor]]:
    """``(agent, mode, mu)`` for every supervised agent."""
    policies: list[tuple[int, int, Tensor]] = []
    for i, agent in enumerate(scene.agents):
        if not agent.supervised:
            continue
        if output.joint is not None:
            modes = output.joint.modes
            policies.extend((i, m, output.joint.agent_trajectories[i, m]) for m in range(modes))
        else:
            k = int(np.argmax(output.marginal.logits.data[i]))
            policies.append((i, 0, output.marginal.trajectories[i, k]))
    return policies


def _sample(
    batch: Sequence[tuple[Scene, ModelOutput]], config: GrpoConfig, rng: np.random.Generator
) -> list[_Policy]:
    policies: list[_Policy] = []
    for s, (scene, output) in enumerate(batch):
        for mode, mu, sigma in ego_policies(output, config.target):
            group = sample_trajectories(mu.data, sigma.data, config.group_size, rng, mode=mode)
            policies.append(_Policy(s, None, group, mu, sigma))
        if config.scope != AlignmentScope.ALL_AGENTS:
            continue
        for i, mode, mu in agent_policies(output, scene):
            sigma = Tensor(np.full(mu.shape, config.agent_sigma))
            group = sample_trajectories(
                mu.data, sigma.data, config.group_size, rng, mode=mode, entity_id=scene.agents[i].id
            )
            policies.append(_Policy(s, i, group, mu, sigma))
    return policies


def align_outputs(
    batch: Sequence[tuple[Scene, ModelOutput]],
    config: GrpoConfig,
    rng: np.random.Generator,
    *,
    threads: int = 1,
    scorer: Scorer = score_rollout,
) -> AlignmentResult:
    """Alignment loss for model outputs paired with the ego-frame scenes they were computed on.

    Sampling runs in order on the caller's thread; scoring fans out over
    ``threads`` workers and is reduced in rollout order.
    """
    policies = _sample(batch, config, rng)

    def score(job: tuple[int, int]) -> tuple[float, bool] | None:
        p, g = job
        policy = policies[p]
        scene = batch[policy.scene_index][0]
        rollout = policy.group.rollouts[g]
        try:
            if policy.agent_index is None:
                ego = scorer(rollout, scene)
                return ego.reward, ego.collided
            agent = score_agent_rollout(rollout, scene, policy.agent_index)
            return agent.reward, agent.collided
        except RewardValidationError as exc:
            logger.warning(
                "rollout_dropped",
                scene_id=scene.scene_id,
                entity_id=policy.group.entity_id,
                mode=policy.group.mode,
                rollout=g,
                reason=exc.message,
            )
            return None

    jobs = [(p, g) for p, policy in enumerate(policies) for g in range(policy.group.size)]
    with span("grpo.score", rollouts=len(jobs)), ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(score, jobs))

    groups: list[RolloutGroup] = []
    terms: list[Tensor] = []
    scored = dropped = skipped = 0
    cursor = 0
    for policy in policies:
        outcomes = results[cursor : cursor + policy.group.size]
        cursor += policy.group.size
        keep = [g for g, outcome in enumerate(outcomes) if outcome is not None]
        scored += len(keep)
        dropped += policy.group.size - len(keep)
        caad_rollouts_scored_total.labels(scope=policy.scope).inc(len(keep))
        caad_rollouts_dropped_total.labels(scope=policy.scope).inc(policy.group.size - len(keep))
        if len(keep) < 2:
            skipped += 1
            caad_groups_skipped_total.labels(scope=policy.scope).inc()
            logger.warning(
                "group_skipped",
                scene_id=batch[policy.scene_index][0].scene_id,
                entity_id=policy.group.entity_id,
                mode=policy.group.mode,
                remaining=len(keep),
            )
            continue
        kept = [outcomes[g] for g in keep]
        group = policy.group.subset(keep).scored(
            [o[0] for o in kept], [o[1] for o in kept], config.eps_std
        )
        groups.append(group)
        new_logp = gaussian_logp(policy.mu, policy.sigma, group.rollouts)
        terms.append(
            clipped_surrogate(new_logp, group.old_logp, group.truncated, config.clip_epsilon)
        )

    loss = -F.mean(F.concat(terms)) if terms else Tensor(0.0)
    logger.debug(
        "align_step_complete",
        scenes=len(batch),
        groups=len(groups),
        scored=scored,
        dropped=dropped,
        skipped=skipped,
    )
    return AlignmentResult(
        loss=loss, groups=tuple(groups), scored=scored, dropped=dropped, skipped=skipped
    )


def align_step(
    scenes: Sequence[Scene],
    model: CaadModel,
    config: GrpoConfig,
    rng: np.random.Generator,
    *,
    threads: int = 1,
    scorer: Scorer = score_rollout,
) -> AlignmentResult:
    """Run ``model`` on ``scenes`` and build the alignment loss (differentiable under a tape)."""
    local = [ego_frame_transform(scene) for scene in scenes]
    batch = [(scene, model.predict(scene)) for scene in local]
    return align_outputs(batch, config, rng, threads=threads, scorer=scorer)
