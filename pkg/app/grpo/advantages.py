"""Group-relative advantages with collision truncation."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError

COLLISION_ADVANTAGE = -1.0


def compute_advantages(
    rewards: npt.ArrayLike, collided: npt.ArrayLike, eps_std: float = 1e-6
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Normalized advantages ``A`` and their truncation.

    ``A = (r - mean r) / max(std r, eps_std)`` with the population standard
    deviation. The truncated advantage is ``-1`` for a collided rollout and
    ``max(0, A)`` otherwise. A group of identical rewards has ``A = 0``.
    """
    r = np.asarray(rewards, dtype=np.float64)
    c = np.asarray(collided, dtype=bool)
    if r.ndim != 1 or r.shape[0] < 2:
        raise ValidationError("advantages need a group of at least two rewards")
    if c.shape != r.shape:
        raise ValidationError("collision flags must match the rewards")
    if np.all(r == r[0]):
        advantages = np.zeros_like(r)
    else:
        advantages = (r - r.mean()) / max(float(r.std()), eps_std)
    truncated = np.where(c, COLLISION_ADVANTAGE, np.maximum(advantages, 0.0))
    return advantages, truncated
