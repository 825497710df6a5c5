"""Adaptive-moment descent with decoupled weight decay."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import numpy.typing as npt

from app.core.errors import CheckpointError, DimensionError
from app.numerics.tensor import Parameter

Array = npt.NDArray[np.float64]

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


def optimizer_step(
    param: Array,
    grad: Array,
    m: Array,
    v: Array,
    step: int,
    lr: float,
    weight_decay: float,
) -> tuple[Array, Array, Array]:
    """One AdamW update at 1-based ``step``; returns ``(param, m, v)``.

    The bias-corrected moment update is applied first, then the decay
    ``p <- p - lr * wd * p``.
    """
    if not (param.shape == grad.shape == m.shape == v.shape):
        raise DimensionError(
            "optimizer state shapes do not match", (param.shape, grad.shape, m.shape, v.shape)
        )
    m = BETA1 * m + (1.0 - BETA1) * grad
    v = BETA2 * v + (1.0 - BETA2) * grad * grad
    m_hat = m / (1.0 - BETA1**step)
    v_hat = v / (1.0 - BETA2**step)
    updated = param - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    updated = updated - lr * weight_decay * updated
    return updated, m, v


class AdamW:
    """Stateful AdamW over named parameters.

    Parameters matched by ``frozen`` are skipped entirely: no update, no decay
    and no moment bookkeeping.
    """

    def __init__(
        self,
        named_params: Sequence[tuple[str, Parameter]],
        lr: float,
        weight_decay: float = 0.0,
        frozen: Callable[[str], bool] | None = None,
    ) -> None:
        self.params = list(named_params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.frozen = frozen or (lambda name: False)
        self.steps = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.steps += 1
        for name, p in self.params:
            if self.frozen(name):
                continue
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            p.data, self.m[name], self.v[name] = optimizer_step(
                p.data, grad, self.m[name], self.v[name], self.steps, self.lr, self.weight_decay
            )

    def state_blocks(self) -> dict[str, Array]:
        blocks = {f"adam_m/{name}": m.copy() for name, m in self.m.items()}
        blocks.update({f"adam_v/{name}": v.copy() for name, v in self.v.items()})
        return blocks

    def load_state(self, m: dict[str, Array], v: dict[str, Array], steps: int) -> None:
        if set(m) != set(self.m) or set(v) != set(self.v):
            raise CheckpointError("optimizer state does not match the model parameters")
        for name in self.m:
            if m[name].shape != self.m[name].shape or v[name].shape != self.v[name].shape:
                raise CheckpointError(f"optimizer state shape mismatch for {name}")
        self.m = {name: arr.copy() for name, arr in m.items()}
        self.v = {name: arr.copy() for name, arr in v.items()}
        self.steps = steps
