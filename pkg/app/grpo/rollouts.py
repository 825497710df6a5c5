"""Rollout groups sampled from a diagonal-Gaussian trajectory policy."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError
from app.grpo.advantages import compute_advantages
from app.losses.functional import HALF_LOG_2PI
from app.model.config import SIGMA_MAX, SIGMA_MIN
from app.model.outputs import SceneHypothesis
from app.numerics import functional as F
from app.numerics.tensor import Tensor, as_tensor

Array = npt.NDArray[np.float64]

SIGMA_TOLERANCE = 1e-12


def gaussian_logp(mu: Tensor | Array, sigma: Tensor | Array, samples: npt.ArrayLike) -> Tensor:
    """Log-density of each sample ``(G, ...)`` under ``Normal(mu, sigma)``, summed per sample."""
    mu, sigma = as_tensor(mu), as_tensor(sigma)
    x = np.asarray(samples, dtype=np.float64)
    z = (x - mu) / sigma
    per_coordinate = z * z * -0.5 - F.log(sigma) - HALF_LOG_2PI
    axes = tuple(range(1, x.ndim))
    return F.sum(per_coordinate, axis=axes) if axes else per_coordinate


@dataclass(frozen=True)
class RolloutGroup:
    """``G`` sampled trajectories of one entity under one policy mode.

    ``old_logp`` is a snapshot taken at sampling time. Rewards, collision flags
    and advantages are filled by :meth:`scored`.
    """

    mode: int
    entity_id: str
    rollouts: Array  # (G, T, 2)
    old_logp: Array  # (G,)
    rewards: Array | None = None
    collided: npt.NDArray[np.bool_] | None = None
    advantages: Array | None = None
    truncated: Array | None = None

    @property
    def size(self) -> int:
        return self.rollouts.shape[0]

    @property
    def is_scored(self) -> bool:
        return self.truncated is not None

    def subset(self, keep: list[int]) -> RolloutGroup:
        idx = np.asarray(keep, dtype=np.int64)
        return replace(self, rollouts=self.rollouts[idx], old_logp=self.old_logp[idx])

    def scored(
        self, rewards: npt.ArrayLike, collided: npt.ArrayLike, eps_std: float
    ) -> RolloutGroup:
        r = np.asarray(rewards, dtype=np.float64)
        c = np.asarray(collided, dtype=bool)
        if r.shape != (self.size,) or c.shape != (self.size,):
            raise ValidationError(
                "one reward and one collision flag per rollout",
                details={"group": self.size, "rewards": list(r.shape)},
            )
        advantages, truncated = compute_advantages(r, c, eps_std)
        return replace(self, rewards=r, collided=c, advantages=advantages, truncated=truncated)


def _check_sigma(sigma: Array) -> None:
    if not np.all((sigma >= SIGMA_MIN - SIGMA_TOLERANCE) & (sigma <= SIGMA_MAX + SIGMA_TOLERANCE)):
        raise ValidationError(
            "policy spread outside its bounds",
            details={"min": float(sigma.min()), "max": float(sigma.max())},
        )


def sample_trajectories(
    mu: npt.ArrayLike,
    sigma: npt.ArrayLike,
    group_size: int,
    rng: np.random.Generator,
    *,
    mode: int = 0,
    entity_id: str = "ego",
) -> RolloutGroup:
    if group_size < 2:
        raise ValidationError(
            "a rollout group needs at least two members", details={"group_size": group_size}
        )
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), mu.shape)
    _check_sigma(sigma)
    rollouts = mu + sigma * rng.standard_normal((group_size, *mu.shape))
    return RolloutGroup(
        mode=mode,
        entity_id=entity_id,
        rollouts=rollouts,
        old_logp=gaussian_logp(mu, sigma, rollouts).data.copy(),
    )


def sample_group(hyp: SceneHypothesis, group_size: int, rng: np.random.Generator) -> RolloutGroup:
    """Draw ``group_size`` ego rollouts from the hypothesis' mean and spread."""
    return sample_trajectories(hyp.ego_traj, hyp.ego_sigma, group_size, rng, mode=hyp.mode_index)
