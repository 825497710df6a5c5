"""Neural building blocks over the tape autodiff."""

from __future__ import annotations

import math
from collections.abc import Iterator

import numpy as np

from app.core.errors import ConfigurationError
from app.numerics import functional as F
from app.numerics.tensor import Parameter, Tensor


class Module:
    """Container that discovers parameters and sub-modules from its attributes.

    Parameter names are dotted attribute paths (``encoder.blocks.0.wq.weight``)
    and are stable across processes, which the checkpoint codec relies on.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{attr}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{attr}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{attr}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Linear(Module):
    """Affine map ``x @ weight + bias`` over the last axis."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
        init_scale: float = 1.0,
    ) -> None:
        std = init_scale / math.sqrt(in_features)
        self.weight = Parameter(rng.normal(0.0, std, size=(in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = F.matmul(x, self.weight) if x.ndim >= 2 else F.matmul(x.reshape(1, -1), self.weight)
        if x.ndim < 2:
            out = out.reshape(-1)
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):
    """Layer normalization with learned gain and bias; can be switched off."""

    def __init__(self, dim: int, enabled: bool = True) -> None:
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.enabled = enabled

    def __call__(self, x: Tensor) -> Tensor:
        if not self.enabled:
            return x
        return F.layer_norm(x) * self.gain + self.bias


class MLP(Module):
    """Two-layer GELU perceptron."""

    def __init__(self, in_features: int, hidden: int, out_features: int, rng: np.random.Generator):
        self.fc1 = Linear(in_features, hidden, rng)
        self.fc2 = Linear(hidden, out_features, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(F.gelu(self.fc1(x)))


class SelfAttentionBlock(Module):
    """Pre-norm multi-head self-attention followed by a GELU feed-forward.

    Operates on ``(..., L, C)`` and attends over the ``L`` axis; leading axes
    are independent batches. There is no positional encoding, so the block is
    equivariant to permutations of the tokens.
    """

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator,
        heads: int = 4,
        ff_mult: int = 4,
        norm: bool = True,
    ) -> None:
        if heads < 1 or dim % heads != 0:
            raise ConfigurationError(
                f"embedding width {dim} is not divisible by {heads} heads",
                details={"dim": dim, "heads": heads},
            )
        self.dim = dim
        self.heads = heads
        self.ln1 = LayerNorm(dim, enabled=norm)
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)
        self.ln2 = LayerNorm(dim, enabled=norm)
        self.ff1 = Linear(dim, ff_mult * dim, rng)
        self.ff2 = Linear(ff_mult * dim, dim, rng)

    def _split_heads(self, x: Tensor) -> Tensor:
        *lead, length, _ = x.shape
        nb = len(lead)
        x = x.reshape(*lead, length, self.heads, self.dim // self.heads)
        return F.transpose(x, (*range(nb), nb + 1, nb, nb + 2))

    def _merge_heads(self, x: Tensor) -> Tensor:
        *lead, _, length, _ = x.shape
        nb = len(lead)
        x = F.transpose(x, (*range(nb), nb + 1, nb, nb + 2))
        return x.reshape(*lead, length, self.dim)

    def __call__(self, tokens: Tensor) -> Tensor:
        h = self.ln1(tokens)
        q = self._split_heads(self.wq(h))
        k = self._split_heads(self.wk(h))
        v = self._split_heads(self.wv(h))
        scores = F.matmul(q, F.swap_last(k)) * (1.0 / math.sqrt(self.dim // self.heads))
        attended = self._merge_heads(F.matmul(F.softmax(scores, axis=-1), v))
        x = tokens + self.wo(attended)
        return x + self.ff2(F.gelu(self.ff1(self.ln2(x))))
