"""Dense float64 tensors with reverse-mode automatic differentiation.

The computation graph is recorded implicitly: every operation produces a new
``Tensor`` holding references to its parents and a closure that propagates
gradients to them. ``backward(loss)`` linearises the graph reachable from the
loss into topological order and visits each node exactly once in reverse,
which is the tape contract the rest of the package relies on.

Tensors are immutable once produced (nothing in this module mutates ``data``
after construction), so independent graphs can be evaluated concurrently.
A single backward pass must own its graph exclusively.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import NumericError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

_GRAD_STATE = threading.local()


def _grad_enabled() -> bool:
    return getattr(_GRAD_STATE, "enabled", True)


class no_grad:
    """Context manager: ops inside compute values but record no graph.

    Purely an allocation saver for inference paths; the numerical results
    are identical with or without it. The switch is per-thread.
    """

    def __enter__(self):
        self._previous = _grad_enabled()
        _GRAD_STATE.enabled = False
        return self

    def __exit__(self, exc_type, exc, tb):
        _GRAD_STATE.enabled = self._previous
        return False


class Tensor:
    """A float64 ndarray node in the autodiff graph.

    ``requires_grad=True`` marks a trainable leaf; operation results carry
    their parents and a backward closure instead.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor initialised with non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"],
                 backward: Callable[[np.ndarray], None]) -> "Tensor":
        if not np.all(np.isfinite(data)):
            raise NumericError("operation produced non-finite values")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = False
        if _grad_enabled():
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # ------------------------------------------------------------------
    # introspection

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out_data = self.data + other.data

        def backward(g: np.ndarray) -> None:
            _accumulate(self, _unbroadcast(g, self.shape))
            _accumulate(other, _unbroadcast(g, other.shape))

        return Tensor._from_op(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            _accumulate(self, -g)

        return Tensor._from_op(-self.data, (self,), backward)

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out_data = self.data * other.data

        def backward(g: np.ndarray) -> None:
            _accumulate(self, _unbroadcast(g * other.data, self.shape))
            _accumulate(other, _unbroadcast(g * self.data, other.shape))

        return Tensor._from_op(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out_data = self.data / other.data

        def backward(g: np.ndarray) -> None:
            _accumulate(self, _unbroadcast(g / other.data, self.shape))
            _accumulate(other, _unbroadcast(-g * self.data / (other.data ** 2),
                                            other.shape))

        return Tensor._from_op(out_data, (self, other), backward)

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul is defined for 2-D tensors only")
        out_data = self.data @ other.data

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g @ other.data.T)
            _accumulate(other, self.data.T @ g)

        return Tensor._from_op(out_data, (self, other), backward)

    # ------------------------------------------------------------------
    # shape manipulation

    @property
    def T(self) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            _accumulate(self, g.T)

        return Tensor._from_op(self.data.T.copy(), (self,), backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.shape

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g.reshape(orig))

        return Tensor._from_op(self.data.reshape(shape).copy(), (self,), backward)

    def narrow(self, axis: int, start: int, stop: int) -> "Tensor":
        """Contiguous slice [start:stop) along one axis."""
        index = [slice(None)] * self.data.ndim
        index[axis] = slice(start, stop)
        index = tuple(index)

        def backward(g: np.ndarray) -> None:
            full = np.zeros_like(self.data)
            full[index] = g
            _accumulate(self, full)

        return Tensor._from_op(self.data[index].copy(), (self,), backward)

    # ------------------------------------------------------------------
    # reductions and elementwise functions

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def backward(g: np.ndarray) -> None:
            if axis is None:
                _accumulate(self, np.broadcast_to(g, shape).copy())
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                _accumulate(self, np.broadcast_to(gg, shape).copy())

        return Tensor._from_op(np.asarray(out_data), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0.0):
            raise NumericError("log requires strictly positive input")
        out_data = np.log(self.data)

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g / self.data)

        return Tensor._from_op(out_data, (self,), backward)

    def exp(self) -> "Tensor":
        with np.errstate(over="ignore"):
            out_data = np.exp(self.data)  # overflow surfaces as NumericError below

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g * out_data)

        return Tensor._from_op(out_data, (self,), backward)

    def sqrt(self) -> "Tensor":
        if np.any(self.data < 0.0):
            raise NumericError("sqrt requires non-negative input")
        out_data = np.sqrt(self.data)

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g * 0.5 / out_data)

        return Tensor._from_op(out_data, (self,), backward)

    def clamp_min(self, floor: float) -> "Tensor":
        """Elementwise max(x, floor); gradient flows only where x > floor."""
        out_data = np.maximum(self.data, floor)
        mask = self.data > floor

        def backward(g: np.ndarray) -> None:
            _accumulate(self, g * mask)

        return Tensor._from_op(out_data, (self,), backward)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        node.grad = node.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and g.shape[i] > 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


# ----------------------------------------------------------------------
# free functions


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, exact CDF form x * Phi(x)."""
    x = as_tensor(x)
    phi = 0.5 * (1.0 + special.erf(x.data * _INV_SQRT2))
    out_data = x.data * phi

    def backward(g: np.ndarray) -> None:
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        _accumulate(x, g * (phi + x.data * pdf))

    return Tensor._from_op(out_data, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (max-subtraction)."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        inner = (g * s).sum(axis=axis, keepdims=True)
        _accumulate(x, s * (g - inner))

    return Tensor._from_op(s, (x,), backward)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def backward(g: np.ndarray) -> None:
        offset = 0
        for p, n in zip(parts, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + n)
            _accumulate(p, g[tuple(index)])
            offset += n

    return Tensor._from_op(out_data, parts, backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two same-shape tensors as a scalar tensor."""
    return (as_tensor(a) * as_tensor(b)).sum()


def backward(loss: Tensor) -> None:
    """Run one reverse pass from a scalar loss.

    Gradients accumulate into ``.grad`` of every tensor reachable from the
    loss; leaves that do not participate keep ``grad=None`` (treated as zero
    by the optimiser). Nodes are visited exactly once, in reverse topological
    order, via an iterative DFS so deep episode graphs cannot hit the
    recursion limit.
    """
    if loss.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.shape}")

    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
