"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from app.numerics.tensor import Parameter, Tape, Tensor

logger = structlog.get_logger(__name__)

DEFAULT_STEP = 1e-5


@dataclass(frozen=True)
class GradCheckReport:
    checked: int
    max_error: float
    worst_parameter: str | None
    worst_index: tuple[int, ...] | None
    rtol: float
    atol: float

    @property
    def passed(self) -> bool:
        return self.max_error <= 1.0


def gradient_error(analytic: float, numeric: float, rtol: float, atol: float) -> float:
    """Error normalized so that values <= 1 pass ``|a - n| <= atol + rtol * |n|``."""
    return abs(analytic - numeric) / (atol + rtol * abs(numeric))


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter] | Sequence[tuple[str, Parameter]],
    *,
    step: float = DEFAULT_STEP,
    rtol: float = 1e-3,
    atol: float = 1e-6,
    per_parameter: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare the tape gradient of ``loss_fn()`` against central differences.

    ``loss_fn`` must be deterministic and return a scalar; it is evaluated
    once under a tape and twice per checked element without one. With
    ``per_parameter`` set, that many elements of each larger parameter are
    drawn with a seeded generator instead of checking every element.
    """
    named = [
        p if isinstance(p, tuple) else (p.name or f"param{i}", p) for i, p in enumerate(params)
    ]
    for _, p in named:
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)

    rng = np.random.default_rng(seed)
    checked = 0
    worst = (0.0, None, None)
    for name, p in named:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        indices = list(np.ndindex(p.shape))
        if per_parameter is not None and len(indices) > per_parameter:
            chosen = rng.choice(len(indices), size=per_parameter, replace=False)
            indices = [indices[i] for i in sorted(chosen)]
        for idx in indices:
            original = p.data[idx]
            p.data[idx] = original + step
            plus = loss_fn().item()
            p.data[idx] = original - step
            minus = loss_fn().item()
            p.data[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            err = gradient_error(float(analytic[idx]), numeric, rtol, atol)
            checked += 1
            if err > worst[0]:
                worst = (err, name, tuple(int(i) for i in idx))

    report = GradCheckReport(
        checked=checked,
        max_error=worst[0],
        worst_parameter=worst[1],
        worst_index=worst[2],
        rtol=rtol,
        atol=atol,
    )
    logger.info(
        "gradcheck_completed",
        checked=checked,
        max_error=report.max_error,
        worst_parameter=report.worst_parameter,
        passed=report.passed,
    )
    return report
