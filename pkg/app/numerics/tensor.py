"""Dense float64 tensors with tape-recorded reverse-mode differentiation.

Operations only record onto a tape while one is active (``with Tape():``);
outside a tape every result is a plain constant, which is how inference and
scoring workers evaluate a frozen parameter snapshot.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from contextvars import ContextVar
from typing import Any

import numpy as np
import numpy.typing as npt

from app.core.errors import DimensionError, TapeError

Array = npt.NDArray[np.float64]
BackwardFn = Callable[[Array], Sequence[Array | None]]

_active_tape: ContextVar[Tape | None] = ContextVar("caad_active_tape", default=None)


class Tensor:
    """Row-major float64 buffer with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_tape")
    __array_ufunc__ = None

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        self.data: Array = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._tape: Tape | None = None

    # -- introspection -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item() requires a single-element tensor", (self.shape,))
        return float(self.data.reshape(()))

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # -- operators (implemented in app.numerics.functional) -----------------

    def __add__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.mul(other, self)

    def __truediv__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.div(self, other)

    def __rtruediv__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.div(other, self)

    def __neg__(self) -> Tensor:
        from app.numerics import functional as F

        return F.neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        from app.numerics import functional as F

        return F.power(self, exponent)

    def __matmul__(self, other: Any) -> Tensor:
        from app.numerics import functional as F

        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        from app.numerics import functional as F

        return F.index(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from app.numerics import functional as F

        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from app.numerics import functional as F

        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        from app.numerics import functional as F

        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return F.reshape(self, tuple(shape))

    def transpose(self, *axes: int) -> Tensor:
        from app.numerics import functional as F

        return F.transpose(self, tuple(axes) if axes else None)

    def backward(self) -> None:
        backward(self)


class Parameter(Tensor):
    """A named, trainable leaf tensor."""

    __slots__ = ()

    def __init__(self, data: Any, name: str | None = None) -> None:
        super().__init__(data, requires_grad=True, name=name)


def as_tensor(value: Any) -> Tensor:
    """Wrap constants as non-differentiable tensors."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tape:
    """Ordered record of primitive operations for one forward/backward episode.

    Nodes are appended at creation time, so every node's parents precede it.
    A tape can be differentiated once; a second ``backward`` raises.
    """

    def __init__(self) -> None:
        self._nodes: list[Tensor] = []
        self._token: Any = None
        self.consumed = False

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, node: Tensor) -> None:
        if self.consumed:
            raise TapeError("cannot record onto a consumed tape")
        node._tape = self
        self._nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeError("tape already consumed by a previous backward pass")
        if loss.size != 1:
            raise DimensionError("backward requires a scalar loss", (loss.shape,))

        seed = np.ones_like(loss.data)
        if loss.is_leaf:
            if loss.requires_grad:
                _accumulate_leaf(loss, seed)
            self._finish()
            return

        pending: dict[int, Array] = {id(loss): seed}
        for node in reversed(self._nodes):
            grad_out = pending.pop(id(node), None)
            if grad_out is None:
                continue
            assert node._backward is not None
            parent_grads = node._backward(grad_out)
            for parent, grad in zip(node._parents, parent_grads, strict=True):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.is_leaf:
                    _accumulate_leaf(parent, grad)
                elif id(parent) in pending:
                    pending[id(parent)] = pending[id(parent)] + grad
                else:
                    pending[id(parent)] = grad
        self._finish()

    def _finish(self) -> None:
        self.consumed = True
        for node in self._nodes:
            node._backward = None
            node._parents = ()
        self._nodes.clear()


def _accumulate_leaf(leaf: Tensor, grad: Array) -> None:
    grad = np.asarray(grad, dtype=np.float64).reshape(leaf.shape)
    if leaf.grad is None:
        leaf.grad = grad.copy()
    else:
        leaf.grad = leaf.grad + grad


def active_tape() -> Tape | None:
    return _active_tape.get()


def make_node(data: Array, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Create an op result, recording it when a tape is active and a parent needs grad."""
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.requires_grad = False
    out.grad = None
    out.name = None
    out._parents = ()
    out._backward = None
    out._tape = None
    tape = _active_tape.get()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        tape.record(out)
    return out


def backward(loss: Tensor) -> None:
    """Differentiate ``loss`` with respect to every requires_grad leaf.

    Gradients accumulate into ``leaf.grad`` across tapes until reset.
    """
    if loss.size != 1:
        raise DimensionError("backward requires a scalar loss", (loss.shape,))
    tape = loss._tape
    if tape is None:
        if loss.requires_grad and loss.is_leaf:
            _accumulate_leaf(loss, np.ones_like(loss.data))
            return
        raise TapeError("loss is not attached to a tape; build it inside `with Tape():`")
    tape.backward(loss)
