"""A small reverse-mode differentiation engine over numpy arrays.

Each ``Tensor`` remembers its parents and a closure that pushes its gradient
back to them; ``backward`` replays the recorded graph in reverse topological
order. Only the operations the denoisers need are implemented.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


class UnsupportedOperation(TypeError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")
    __array_ufunc__ = None  # ndarray (op) Tensor dispatches to the reflected method

    def __init__(self, data, parents: tuple["Tensor", ...] = (), requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self._parents = parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g

    def _make(self, data, parents, backward) -> "Tensor":
        out = Tensor(data, parents)
        if out.requires_grad:
            out._backward = backward
        return out

    # --- elementwise -------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(g, b.shape))

        return self._make(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return self._make(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise UnsupportedOperation("division by a tensor")
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        raise UnsupportedOperation("division by a tensor")

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise UnsupportedOperation("tensor exponent")
        a = self

        def backward(g):
            a._accumulate(g * p * a.data ** (p - 1))

        return self._make(a.data ** p, (a,), backward)

    def tanh(self):
        y = np.tanh(self.data)
        a = self

        def backward(g):
            a._accumulate(g * (1.0 - y * y))

        return self._make(y, (a,), backward)

    def sigmoid(self):
        y = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        a = self

        def backward(g):
            a._accumulate(g * y * (1.0 - y))

        return self._make(y, (a,), backward)

    def silu(self):
        x = self.data
        s = 0.5 * (1.0 + np.tanh(0.5 * x))
        a = self

        def backward(g):
            a._accumulate(g * (s * (1.0 + x * (1.0 - s))))

        return self._make(x * s, (a,), backward)

    def exp(self):
        y = np.exp(self.data)
        a = self

        def backward(g):
            a._accumulate(g * y)

        return self._make(y, (a,), backward)

    def clamp_min(self, lo: float):
        a = self
        keep = self.data >= lo

        def backward(g):
            a._accumulate(g * keep)

        return self._make(np.where(keep, self.data, lo), (a,), backward)

    # --- linear algebra and shape -----------------------------------------

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
            if b.requires_grad:
                if a.data.ndim > 2 and b.data.ndim == 2:
                    a2 = a.data.reshape(-1, a.data.shape[-1])
                    b._accumulate(a2.T @ g.reshape(-1, g.shape[-1]))
                else:
                    b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

        return self._make(a.data @ b.data, (a, b), backward)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

        return self._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else np.prod([self.data.shape[ax] for ax in np.atleast_1d(axis)])
        return self.sum(axis, keepdims) * (1.0 / n)

    def reshape(self, *shape):
        a = self

        def backward(g):
            a._accumulate(g.reshape(a.shape))

        return self._make(a.data.reshape(*shape), (a,), backward)

    def expand(self, axis: int):
        """Insert a length-1 axis."""
        a = self

        def backward(g):
            a._accumulate(np.squeeze(g, axis))

        return self._make(np.expand_dims(a.data, axis), (a,), backward)

    def log_softmax(self, axis: int = -1):
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        y = shifted - lse
        a = self

        def backward(g):
            a._accumulate(g - np.exp(y) * g.sum(axis=axis, keepdims=True))

        return self._make(y, (a,), backward)

    # --- driver -------------------------------------------------------------

    def backward(self, seed: np.ndarray | None = None) -> None:
        if self.data.size != 1 and seed is None:
            raise ValueError("backward from a non-scalar needs an explicit seed gradient")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data) if seed is None else seed
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    node.grad = None  # free interior buffers


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for p, gp in zip(parts, np.split(g, splits, axis=axis)):
            p._accumulate(gp)

    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    if out.requires_grad:
        out._backward = backward
    return out


def parameters(params: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in params.items()}


def grad(params: Mapping[str, np.ndarray], loss_fn: Callable[[dict[str, Tensor]], Tensor]) -> tuple[float, dict[str, np.ndarray]]:
    """Value and gradient of ``loss_fn`` with respect to every entry of ``params``."""
    leaves = parameters(params)
    loss = loss_fn(leaves)
    if not isinstance(loss, Tensor):
        loss = as_tensor(loss)
    if loss.data.size != 1:
        raise ValueError("loss must be a scalar")
    if loss.requires_grad:
        loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in leaves.items()}
    return float(loss.data), grads
