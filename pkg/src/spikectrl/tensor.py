"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable operation records its inputs and a backward closure on
the output tensor. Calling ``backward()`` on a scalar walks the recorded
nodes in reverse creation order (a valid topological order, and a fixed one,
so gradient reduction is reproducible bit for bit) and accumulates gradients
into every participating tensor that ``requires_grad``. The graph is freed
afterwards; a second backward through the same nodes raises.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

_dtype = np.float64
_grad_enabled = True
_ids = itertools.count()


def set_default_dtype(dtype) -> None:
    """Set the scalar type used for newly created tensors ('float64'/'float32')."""
    global _dtype
    dt = np.dtype(dtype).type
    if dt not in (np.float64, np.float32):
        raise ValueError(f"unsupported dtype {dtype!r}; use float64 or float32")
    _dtype = dt


def default_dtype():
    return _dtype


class no_grad:
    """Context manager that disables graph recording inside the block."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A dense real array, optionally participating in gradient recording.

    ``grad`` is None until a backward pass touches the tensor; it then holds
    an array of the same shape. Gradients accumulate additively, so a leaf
    used twice in one graph receives the sum of both path contributions.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_freed", "_id")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=_dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple | None = None
        self._backward_fn: Callable | None = None
        self._freed = False
        self._id = next(_ids)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward_fn: Callable) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
        out._freed = False
        out._id = next(_ids)
        return out

    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"],
                backward_fn: Callable) -> "Tensor":
        if _grad_enabled and any(p.requires_grad for p in parents):
            return Tensor._make(data, tuple(parents), backward_fn)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out._parents = None
        out._backward_fn = None
        out._freed = False
        out._id = next(_ids)
        return out

    def _accumulate(self, g: np.ndarray, own: bool) -> None:
        if self.grad is None:
            self.grad = g if own else g.copy()
        else:
            self.grad += g

    # -- basic properties -----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return self.data.item()

    def numpy(self) -> np.ndarray:
        """The underlying value array (a view; do not mutate in-place)."""
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    # -- backward -------------------------------------------------------------

    def backward(self) -> None:
        """Propagate d(self)/d(x) into every participating tensor.

        Raises if self is not scalar or if the graph below was already
        consumed by a previous backward pass.
        """
        if self.size != 1:
            raise ValueError(
                f"backward requires a scalar, got shape {self.shape}")
        if self._freed:
            raise RuntimeError(
                "backward through a freed graph; re-record the computation "
                "before calling backward again")
        if self._parents is None:
            # a constant or leaf scalar: nothing upstream to traverse
            if self.requires_grad:
                self._accumulate(np.ones_like(self.data), own=True)
            return
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            if t._freed:
                raise RuntimeError(
                    "backward through a freed graph; re-record the "
                    "computation before calling backward again")
            if t._parents is not None:
                nodes.append(t)
                stack.extend(t._parents)
        # creation order is a topological order; walk it in reverse
        nodes.sort(key=lambda t: t._id)

        self._accumulate(np.ones_like(self.data), own=True)
        for t in reversed(nodes):
            g = t.grad
            if g is not None:
                t._backward_fn(g)
            t._freed = True
            t._parents = None
            t._backward_fn = None
            t.grad = None

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        data = self.data + other.data

        def backward_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape), own=False)
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape), own=False)

        return Tensor._result(data, (self, other), backward_fn)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        data = self.data - other.data

        def backward_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape), own=False)
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g, b.data.shape), own=True)

        return Tensor._result(data, (self, other), backward_fn)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        data = self.data * other.data

        def backward_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape), own=True)
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape), own=True)

        return Tensor._result(data, (self, other), backward_fn)

    __rmul__ = __mul__

    def __neg__(self):
        def backward_fn(g, a=self):
            if a.requires_grad:
                a._accumulate(-g, own=True)

        return Tensor._result(-self.data, (self,), backward_fn)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; "
                            "multiply by a reciprocal instead")
        return self * (1.0 / other)

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = self._coerce(other)
        data = self.data @ other.data

        def backward_fn(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(g @ b.data.T, own=True)
            if b.requires_grad:
                b._accumulate(a.data.T @ g, own=True)

        return Tensor._result(data, (self, other), backward_fn)

    def __getitem__(self, key):
        data = self.data[key]

        def backward_fn(g, a=self, key=key):
            if a.requires_grad:
                buf = np.zeros_like(a.data)
                buf[key] = g
                a._accumulate(buf, own=True)

        return Tensor._result(data, (self,), backward_fn)

    # -- elementwise functions --------------------------------------------------

    def exp(self):
        data = np.exp(self.data)

        def backward_fn(g, a=self, y=data):
            if a.requires_grad:
                a._accumulate(g * y, own=True)

        return Tensor._result(data, (self,), backward_fn)

    def tanh(self):
        data = np.tanh(self.data)

        def backward_fn(g, a=self, y=data):
            if a.requires_grad:
                a._accumulate(g * (1.0 - y * y), own=True)

        return Tensor._result(data, (self,), backward_fn)

    def sigmoid(self):
        data = 1.0 / (1.0 + np.exp(-self.data))

        def backward_fn(g, a=self, y=data):
            if a.requires_grad:
                a._accumulate(g * (y * (1.0 - y)), own=True)

        return Tensor._result(data, (self,), backward_fn)

    def square(self):
        data = self.data * self.data

        def backward_fn(g, a=self):
            if a.requires_grad:
                a._accumulate(g * (2.0 * a.data), own=True)

        return Tensor._result(data, (self,), backward_fn)

    def abs(self):
        data = np.abs(self.data)

        def backward_fn(g, a=self):
            if a.requires_grad:
                a._accumulate(g * np.sign(a.data), own=True)

        return Tensor._result(data, (self,), backward_fn)

    def sum(self, axis=None):
        data = np.asarray(self.data.sum(axis=axis))

        def backward_fn(g, a=self, axis=axis):
            if a.requires_grad:
                if axis is None:
                    a._accumulate(np.broadcast_to(g, a.data.shape).copy(),
                                  own=True)
                else:
                    a._accumulate(
                        np.broadcast_to(np.expand_dims(g, axis), a.data.shape)
                        .copy(), own=True)

        return Tensor._result(data, (self,), backward_fn)

    def mean(self, axis=None):
        n = self.size if axis is None else (
            np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis) * (1.0 / float(n))

    def reshape(self, *shape):
        data = self.data.reshape(*shape)

        def backward_fn(g, a=self):
            if a.requires_grad:
                a._accumulate(g.reshape(a.data.shape), own=False)

        return Tensor._result(data, (self,), backward_fn)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an axis; gradients split back by segment."""
    ts = list(tensors)
    data = np.concatenate([t.data for t in ts], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in ts])[:-1]

    def backward_fn(g, ts=ts, splits=splits, axis=axis):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece, own=False)

    return Tensor._result(data, ts, backward_fn)


def maximum(t: Tensor, bound: float) -> Tensor:
    """Elementwise max(t, bound) against a constant bound."""
    data = np.maximum(t.data, bound)

    def backward_fn(g, a=t, bound=bound):
        if a.requires_grad:
            a._accumulate(g * (a.data > bound), own=True)

    return Tensor._result(data, (t,), backward_fn)


def minimum(t: Tensor, bound: float) -> Tensor:
    """Elementwise min(t, bound) against a constant bound."""
    data = np.minimum(t.data, bound)

    def backward_fn(g, a=t, bound=bound):
        if a.requires_grad:
            a._accumulate(g * (a.data < bound), own=True)

    return Tensor._result(data, (t,), backward_fn)


def spike(x: Tensor, grad_fn: Callable[[np.ndarray], np.ndarray]) -> Tensor:
    """Heaviside step with a custom backward.

    Forward emits exactly 1.0 where ``x >= 0`` and exactly 0.0 elsewhere.
    Backward multiplies the upstream gradient elementwise by ``grad_fn(x)``,
    the configured surrogate derivative evaluated at the pre-threshold value.
    """
    data = (x.data >= 0.0).astype(x.data.dtype)

    def backward_fn(g, a=x, grad_fn=grad_fn):
        if a.requires_grad:
            a._accumulate(g * grad_fn(a.data), own=True)

    return Tensor._result(data, (x,), backward_fn)


def check_finite(value, what: str) -> None:
    """Raise ValueError if the array or tensor contains NaN or Inf."""
    data = value.data if isinstance(value, Tensor) else np.asarray(value)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite values in {what}")
