"""Reverse-mode automatic differentiation over 64-bit numpy arrays.

A small tape-free engine in the micrograd style: every operation builds a
node holding its parents and a closure that scatters the output gradient
back to them.  `Tensor.backward()` walks the graph in reverse topological
order.  Everything is float64; there is no GPU path and no mixed precision.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Gradient-carrying multi-dimensional array."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward: Callable | None = None):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward

    # -- basics -----------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph construction -----------------------------------------------
    @staticmethod
    def _lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def _make(self, data, parents, backward) -> "Tensor":
        needs = any(p.requires_grad for p in parents)
        if not needs:
            return Tensor(data)
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        out_data = self.data + other.data

        def backward(g):
            return (_unbroadcast(g, self.data.shape),
                    _unbroadcast(g, other.data.shape))
        return self._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            return (-g,)
        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out_data = self.data * other.data
        a, b = self.data, other.data

        def backward(g):
            return (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))
        return self._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * self._lift(other).pow(-1.0)

    def __rtruediv__(self, other):
        return self._lift(other) * self.pow(-1.0)

    def pow(self, exponent: float) -> "Tensor":
        p = float(exponent)
        out_data = self.data ** p
        x = self.data

        def backward(g):
            return (g * p * x ** (p - 1.0),)
        return self._make(out_data, (self,), backward)

    def sqrt(self) -> "Tensor":
        return self.pow(0.5)

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(g):
            return (g * out_data,)
        return self._make(out_data, (self,), backward)

    def log(self) -> "Tensor":
        x = self.data

        def backward(g):
            return (g / x,)
        return self._make(np.log(x), (self,), backward)

    def relu(self) -> "Tensor":
        mask = self.data > 0  # subgradient 0 at exactly 0

        def backward(g):
            return (g * mask,)
        return self._make(self.data * mask, (self,), backward)

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.data, other.data
        out_data = a @ b

        def backward(g):
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))
        return self._make(out_data, (self, other), backward)

    # -- shape ops ----------------------------------------------------------
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def backward(g):
            return (g.reshape(old),)
        return self._make(self.data.reshape(shape), (self,), backward)

    def swapaxes(self, a: int, b: int) -> "Tensor":
        def backward(g):
            return (np.swapaxes(g, a, b),)
        return self._make(np.swapaxes(self.data, a, b), (self,), backward)

    def __getitem__(self, idx):
        shape = self.data.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, idx, g)
            return (full,)
        return self._make(self.data[idx], (self,), backward)

    # -- reductions -----------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.data.shape
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return self._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        """Max reduction; ties route the gradient to the first index."""
        x = self.data
        if axis is None:
            flat_idx = int(np.argmax(x))
            out_data = x.reshape(-1)[flat_idx]

            def backward(g):
                full = np.zeros(x.shape)
                full.reshape(-1)[flat_idx] = g
                return (full,)
            return self._make(out_data, (self,), backward)

        idx = np.argmax(x, axis=axis)
        out_data = np.take_along_axis(x, np.expand_dims(idx, axis), axis=axis)
        if not keepdims:
            out_data = np.squeeze(out_data, axis=axis)

        def backward(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            full = np.zeros(x.shape)
            np.put_along_axis(full, np.expand_dims(idx, axis), g, axis=axis)
            return (full,)
        return self._make(out_data, (self,), backward)

    # -- autodiff -------------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without grad requires a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        self.grad = _as_array(grad)
        for node in reversed(order):
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad = parent.grad + g


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [Tensor._lift(t) for t in tensors]
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))
    needs = any(t.requires_grad for t in tensors)
    if not needs:
        return Tensor(out_data)
    return Tensor(out_data, requires_grad=True, _parents=tuple(tensors),
                  _backward=backward)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    a, b = Tensor._lift(a), Tensor._lift(b)
    take_a = a.data >= b.data

    def backward(g):
        return (_unbroadcast(g * take_a, a.data.shape),
                _unbroadcast(g * ~take_a, b.data.shape))
    needs = a.requires_grad or b.requires_grad
    out_data = np.where(take_a, a.data, b.data)
    if not needs:
        return Tensor(out_data)
    return Tensor(out_data, requires_grad=True, _parents=(a, b), _backward=backward)


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable log-sum-exp along `axis` (shift is detached)."""
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    shifted = x - shift
    out = shifted.exp().sum(axis=axis).log()
    return out + shift.reshape(out.shape)


def grad_check(f: Callable[[np.ndarray], Tensor], x: np.ndarray,
               h: float = 1e-5, coords: Iterable[tuple] | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps a raw array to a scalar Tensor.  The relative error denominator
    is max(|analytic|, |numeric|, 1e-8) per coordinate.
    """
    x = _as_array(x).copy()
    xt = Tensor(x, requires_grad=True)
    out = f(xt)
    out.backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(x)

    if coords is None:
        coords = list(np.ndindex(*x.shape)) if x.shape else [()]
    worst = 0.0
    for c in coords:
        orig = x[c]
        x[c] = orig + h
        fp = f(Tensor(x)).item()
        x[c] = orig - h
        fm = f(Tensor(x)).item()
        x[c] = orig
        numeric = (fp - fm) / (2.0 * h)
        a = float(analytic[c])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
