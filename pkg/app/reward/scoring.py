"""Aggregate planning reward: safety penalties times a weighted quality term."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import structlog

from app.core.errors import RewardValidationError
from app.core.metrics import caad_reward_latency_seconds
from app.reward.subscores import (
    ComfortTerm,
    collision_against,
    entity_comfort,
    entity_poses,
    score_comfort,
    score_dac,
    score_dd,
    score_ep,
    score_nc,
    score_ttc,
)
from app.scene.types import FUTURE_STEPS, Scene

logger = structlog.get_logger(__name__)

SANITY_RADIUS = 500.0
WEIGHT_EP = 5.0
WEIGHT_TTC = 5.0
WEIGHT_COMFORT = 2.0


@dataclass(frozen=True)
class RewardBreakdown:
    nc: float
    dac: float
    dd: float
    ep: float
    ttc: float
    comfort: float
    d_opp: float
    t_ttc: int | None
    collided: bool
    at_fault: bool
    collision_time: float | None
    collision_agent: str | None
    comfort_terms: dict[str, ComfortTerm] = field(default_factory=dict)
    reward: float = 0.0

    @property
    def penalty(self) -> float:
        return self.nc * self.dac * self.dd


def aggregate(nc: float, dac: float, dd: float, ep: float, ttc: float, comfort: float) -> float:
    quality = (WEIGHT_EP * ep + WEIGHT_TTC * ttc + WEIGHT_COMFORT * comfort) / (
        WEIGHT_EP + WEIGHT_TTC + WEIGHT_COMFORT
    )
    return nc * dac * dd * quality


def _check_rollout(rollout: npt.ArrayLike, origin: np.ndarray) -> np.ndarray:
    arr = np.asarray(rollout, dtype=np.float64)
    if arr.shape != (FUTURE_STEPS, 2):
        raise RewardValidationError(
            f"rollout must be a ({FUTURE_STEPS}, 2) array", details={"shape": list(arr.shape)}
        )
    if not np.all(np.isfinite(arr)):
        raise RewardValidationError("rollout contains non-finite points")
    reach = float(np.abs(arr - origin).max())
    if reach > SANITY_RADIUS:
        raise RewardValidationError(
            "rollout leaves the sanity box around its origin", details={"reach": reach}
        )
    return arr


def score_rollout(rollout: npt.ArrayLike, scene: Scene) -> RewardBreakdown:
    """Score one ego rollout against the scene's agent GT futures and map."""
    started = time.perf_counter()
    arr = _check_rollout(rollout, scene.ego.position)
    nc = score_nc(arr, scene)
    dac = score_dac(arr, scene.drivable)
    dd, d_opp = score_dd(arr, scene)
    ttc, t_ttc = score_ttc(arr, scene)
    comfort, terms = score_comfort(arr, scene)
    ep = score_ep(arr, scene)
    caad_reward_latency_seconds.observe(time.perf_counter() - started)
    return RewardBreakdown(
        nc=nc.score,
        dac=dac,
        dd=dd,
        ep=ep,
        ttc=ttc,
        comfort=comfort,
        d_opp=d_opp,
        t_ttc=t_ttc,
        collided=nc.collided,
        at_fault=nc.at_fault,
        collision_time=nc.time,
        collision_agent=nc.agent_id,
        comfort_terms=terms,
        reward=aggregate(nc.score, dac, dd, ep, ttc, comfort),
    )


def expert_rollout(scene: Scene) -> np.ndarray:
    return np.array(scene.ego.future[:FUTURE_STEPS, :2])


@dataclass(frozen=True)
class AgentRewardBreakdown:
    agent_id: str
    nc: float
    comfort: float
    collided: bool
    reward: float


def score_agent_rollout(rollout: npt.ArrayLike, scene: Scene, index: int) -> AgentRewardBreakdown:
    """Score agent ``index``'s rollout against the GT of every other entity, ego included.

    Only collision and comfort apply to agents; the reward is their product.
    """
    agent = scene.agents[index]
    arr = _check_rollout(rollout, agent.position)
    others = (scene.ego, *(a for j, a in enumerate(scene.agents) if j != index))
    collision = collision_against(entity_poses(arr, agent), agent.footprint, others)
    comfort, _ = entity_comfort(arr, agent)
    return AgentRewardBreakdown(
        agent_id=agent.id,
        nc=collision.score,
        comfort=comfort,
        collided=collision.collided,
        reward=collision.score * comfort,
    )
