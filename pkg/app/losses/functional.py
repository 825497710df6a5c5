"""Elementary differentiable losses."""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError
from app.numerics import functional as F
from app.numerics.tensor import Tensor

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
DEFAULT_GAMMA = 2.0
DEFAULT_ALPHA = 0.25


def _valid_rows(valid: npt.ArrayLike | None, steps: int) -> npt.NDArray[np.int64]:
    mask = np.ones(steps, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValidationError("loss needs at least one valid step")
    return rows


def focal_loss(
    logits: Tensor, target: int, gamma: float = DEFAULT_GAMMA, alpha: float = DEFAULT_ALPHA
) -> Tensor:
    """``-alpha (1 - p_t)^gamma log p_t`` over a softmax of ``logits``."""
    if not 0 <= target < logits.shape[-1]:
        raise ValidationError(
            f"focal target {target} out of range", details={"classes": logits.shape[-1]}
        )
    log_pt = F.log_softmax(logits)[target]
    if gamma == 0:
        return log_pt * -alpha
    modulator = (1.0 - F.exp(log_pt)) ** gamma
    return modulator * log_pt * -alpha


def gaussian_nll(
    mu: Tensor, sigma: Tensor, target: npt.ArrayLike, valid: npt.ArrayLike | None = None
) -> Tensor:
    """Mean diagonal-Gaussian negative log-likelihood over valid steps and both coordinates."""
    rows = _valid_rows(valid, mu.shape[0])
    target = np.asarray(target, dtype=np.float64)[rows]
    m, s = mu[rows], sigma[rows]
    z = (m - target) / s
    return F.mean(z * z * 0.5 + F.log(s)) + HALF_LOG_2PI


def l2_regression(
    pred: Tensor, target: npt.ArrayLike, valid: npt.ArrayLike | None = None
) -> Tensor:
    """Mean squared Euclidean point error over valid steps."""
    rows = _valid_rows(valid, pred.shape[0])
    diff = pred[rows] - np.asarray(target, dtype=np.float64)[rows]
    return F.mean(F.sum(diff * diff, axis=-1))
