"""Clipped group-relative policy objective."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from app.core.errors import NumericError, ValidationError
from app.grpo.rollouts import RolloutGroup, gaussian_logp
from app.numerics import functional as F
from app.numerics.tensor import Tensor


def clipped_surrogate(
    new_logp: Tensor,
    old_logp: npt.ArrayLike,
    advantages: npt.ArrayLike,
    clip_epsilon: float,
) -> Tensor:
    """Per-rollout ``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    ratio = F.exp(new_logp - np.asarray(old_logp, dtype=np.float64))
    bad = np.flatnonzero(~np.isfinite(ratio.data))
    if bad.size:
        raise NumericError("non-finite importance ratio", details={"indices": bad.tolist()})
    adv = np.asarray(advantages, dtype=np.float64)
    clipped = F.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return F.minimum(ratio * adv, clipped * adv)


def grpo_loss(group: RolloutGroup, mu: Tensor, sigma: Tensor, clip_epsilon: float) -> Tensor:
    """Negative mean clipped surrogate of a scored group under the current ``(mu, sigma)``."""
    if not group.is_scored:
        raise ValidationError("group has no advantages yet", details={"mode": group.mode})
    new_logp = gaussian_logp(mu, sigma, group.rollouts)
    return -F.mean(clipped_surrogate(new_logp, group.old_logp, group.truncated, clip_epsilon))
