"""Differentiable primitives.

Every function takes tensors (or constants) and returns a tensor whose
backward rule maps the output gradient to one gradient per parent. Binary
elementwise ops support numpy broadcasting; gradients are summed back to the
operand shape.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any

import numpy as np

from app.core.errors import DimensionError, NumericError
from app.numerics.tensor import Array, Tensor, as_tensor, make_node

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715

LAYER_NORM_EPS = 1e-10


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` over the axes that broadcasting expanded from ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(a.data + b.data, (a, b), _backward)


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(a.data - b.data, (a, b), _backward)


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_node(a.data * b.data, (a, b), _backward)


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g: Array) -> tuple[Array, Array]:
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(a.data / b.data, (a, b), _backward)


def neg(x: Any) -> Tensor:
    x = as_tensor(x)
    return make_node(-x.data, (x,), lambda g: (-g,))


def power(x: Any, exponent: float) -> Tensor:
    """Raise to a constant real exponent."""
    x = as_tensor(x)
    if exponent == 0:
        return Tensor(np.ones_like(x.data))

    def _backward(g: Array) -> tuple[Array]:
        return (g * exponent * np.power(x.data, exponent - 1),)

    return make_node(np.power(x.data, exponent), (x,), _backward)


def exp(x: Any) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,))


def log(x: Any) -> Tensor:
    x = as_tensor(x)
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Any) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return make_node(out, (x,), lambda g: (g * 0.5 / out,))


def tanh(x: Any) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_node(out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Any) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_node(out, (x,), lambda g: (g * out * (1.0 - out),))


def cos(x: Any) -> Tensor:
    x = as_tensor(x)
    return make_node(np.cos(x.data), (x,), lambda g: (-g * np.sin(x.data),))


def sin(x: Any) -> Tensor:
    x = as_tensor(x)
    return make_node(np.sin(x.data), (x,), lambda g: (g * np.cos(x.data),))


def gelu(x: Any) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    u = _GELU_C * (x.data + _GELU_K * x.data**3)
    t = np.tanh(u)
    out = 0.5 * x.data * (1.0 + t)

    def _backward(g: Array) -> tuple[Array]:
        du = _GELU_C * (1.0 + 3.0 * _GELU_K * x.data**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du),)

    return make_node(out, (x,), _backward)


def clip(x: Any, low: float, high: float) -> Tensor:
    """Clamp to [low, high]; gradient flows only where the input is inside."""
    x = as_tensor(x)
    inside = (x.data >= low) & (x.data <= high)
    return make_node(np.clip(x.data, low, high), (x,), lambda g: (g * inside,))


def minimum(a: Any, b: Any) -> Tensor:
    """Elementwise minimum; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g * take_a, a.shape), _unbroadcast(g * ~take_a, b.shape)

    return make_node(np.where(take_a, a.data, b.data), (a, b), _backward)


# -- reductions and shape ---------------------------------------------------


def _expand_reduced(g: Array, shape: tuple[int, ...], axis: Any, keepdims: bool) -> Array:
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def sum(x: Any, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)
    return make_node(out, (x,), lambda g: (_expand_reduced(g, x.shape, axis, keepdims).copy(),))


def mean(x: Any, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size / max(out.size, 1) if x.data.size else 1.0

    def _backward(g: Array) -> tuple[Array]:
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)

    return make_node(out, (x,), _backward)


def reshape(x: Any, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}", (x.shape, shape)) from exc
    return make_node(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Any, axes: tuple[int, ...] | None = None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return make_node(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swap_last(x: Any) -> Tensor:
    """Swap the last two axes."""
    x = as_tensor(x)
    axes = (*range(x.ndim - 2), x.ndim - 1, x.ndim - 2)
    return transpose(x, axes)


def index(x: Any, key: Any) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate in backward."""
    x = as_tensor(x)
    if isinstance(key, Tensor):
        key = key.data.astype(np.int64)

    def _backward(g: Array) -> tuple[Array]:
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return make_node(np.asarray(x.data[key]), (x,), _backward)


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _backward(g: Array) -> list[Array]:
        return np.split(g, bounds, axis=axis)

    return make_node(out, parts, _backward)


def stack(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out = np.stack([p.data for p in parts], axis=axis)

    def _backward(g: Array) -> list[Array]:
        return [np.take(g, i, axis=axis) for i in range(len(parts))]

    return make_node(out, parts, _backward)


def cumsum(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)

    def _backward(g: Array) -> tuple[Array]:
        return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

    return make_node(np.cumsum(x.data, axis=axis), (x,), _backward)


# -- linear algebra ---------------------------------------------------------


def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul shape mismatch: {a.shape} @ {b.shape}",
            (a.shape, b.shape),
        )

    def _backward(g: Array) -> tuple[Array, Array]:
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(np.matmul(a.data, b.data), (a, b), _backward)


# -- normalizing maps -------------------------------------------------------


def _check_finite_logits(x: Tensor, op: str) -> None:
    if np.isnan(x.data).any():
        raise NumericError(f"{op} received NaN input", details={"shape": list(x.shape)})


def softmax(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _check_finite_logits(x, "softmax")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(g: Array) -> tuple[Array]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (x,), _backward)


def log_softmax(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _check_finite_logits(x, "log_softmax")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def _backward(g: Array) -> tuple[Array]:
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_node(out, (x,), _backward)


def layer_norm(x: Any, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean and unit variance (no affine)."""
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def _backward(g: Array) -> tuple[Array]:
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)

    return make_node(xhat, (x,), _backward)
