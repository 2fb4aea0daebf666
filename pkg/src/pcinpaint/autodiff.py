"""Minimal reverse-mode autodiff over dense float64 arrays.

Supports exactly the operations the completion model and its losses
need: matmul, broadcasting add/mul, relu, axis max-pooling, elementwise
maximum, concat, reshape, sum, mean, plus custom nodes (the Chamfer
nearest-neighbor selection lives in losses). Graphs are DAGs by
construction: an op's output is a fresh Tensor, so cycles cannot form.
"""

from __future__ import annotations

import numpy as np

from .errors import NonScalarLoss, ShapeMismatch

# Enabled by tests: every freshly created node is checked for NaN/Inf.
NAN_CHECK = False


class Tensor:
    """A node in the computation graph holding an ndarray value."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None
        if NAN_CHECK and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite tensor value")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction helpers -------------------------------------

    @staticmethod
    def _node(data, parents, backward) -> "Tensor":
        out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accum(self, g: np.ndarray) -> None:
        if self.requires_grad:
            if self.grad is None:
                self.grad = np.zeros_like(self.data)
            self.grad += g

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        def back(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))
        return Tensor._node(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        def back(g):
            self._accum(-g)
        return Tensor._node(-self.data, (self,), back)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        def back(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))
        return Tensor._node(self.data * other.data, (self, other), back)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("division only by python scalars")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeMismatch("matmul expects 2D operands")
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeMismatch(
                f"matmul {self.data.shape} @ {other.data.shape}")
        def back(g):
            self._accum(g @ other.data.T)
            other._accum(self.data.T @ g)
        return Tensor._node(self.data @ other.data, (self, other), back)

    # -- shape ops ---------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        def back(g):
            self._accum(g.reshape(old))
        return Tensor._node(self.data.reshape(shape), (self,), back)

    # -- nonlinearities and reductions ---------------------------------------

    def relu(self):
        mask = self.data > 0
        def back(g):
            self._accum(g * mask)
        return Tensor._node(self.data * mask, (self,), back)

    def max(self, axis: int, keepdims: bool = True):
        """Max-pool along one axis; gradient routes to the first argmax."""
        idx = np.expand_dims(self.data.argmax(axis=axis), axis)
        out = np.take_along_axis(self.data, idx, axis=axis)
        if not keepdims:
            out = np.squeeze(out, axis=axis)
        def back(g):
            gg = np.expand_dims(g, axis) if not keepdims else g
            buf = np.zeros_like(self.data)
            np.put_along_axis(buf, idx, gg, axis=axis)
            self._accum(buf)
        return Tensor._node(out, (self,), back)

    def sum(self):
        def back(g):
            self._accum(np.full_like(self.data, float(g)))
        return Tensor._node(self.data.sum(), (self,), back)

    def mean(self):
        n = self.data.size
        def back(g):
            self._accum(np.full_like(self.data, float(g) / n))
        return Tensor._node(self.data.mean(), (self,), back)

    # -- reverse pass ------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode accumulation from a scalar output."""
        if self.data.size != 1:
            _scalar_err(self)
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _scalar_err(t: Tensor):
    raise NonScalarLoss(f"expected a scalar, got shape {t.data.shape}")


def _toposort(root: Tensor) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"maximum {a.data.shape} vs {b.data.shape}")
    take_a = a.data >= b.data
    def back(g):
        a._accum(g * take_a)
        b._accum(g * ~take_a)
    return Tensor._node(np.where(take_a, a.data, b.data), (a, b), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    def back(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t._accum(g[tuple(sl)])
    return Tensor._node(np.concatenate([t.data for t in tensors], axis=axis),
                        tensors, back)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None
