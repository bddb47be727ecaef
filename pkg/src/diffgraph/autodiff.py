"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor records the op that produced it and a vector-Jacobian closure;
backward() walks the tape in reverse topological order. Only the operations
the encoders and losses need are implemented.
"""
from __future__ import annotations

import numpy as np

from .errors import TrainingDivergedError
from .sparse import SparseMatrix


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    # elementwise arithmetic ------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def leaf(x) -> Tensor:
    return Tensor(x, requires_grad=True)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(a.data + b.data, parents=(a, b), vjp=vjp)


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, parents=(a,), vjp=lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return Tensor(a.data * b.data, parents=(a, b), vjp=vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data

    def vjp(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 1 and bd.ndim == 2:
            return bd @ g, np.outer(ad, g)
        if ad.ndim == 2 and bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g * bd, g * ad  # 1-D dot

    return Tensor(ad @ bd, parents=(a, b), vjp=vjp)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def vjp(g):
        return (g * mask,)

    return Tensor(np.where(mask, a.data, 0.0), parents=(a,), vjp=vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return Tensor(out, parents=(a,), vjp=vjp)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor(out, parents=(a,), vjp=lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), parents=(a,), vjp=lambda g: (g / a.data,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)

    def vjp(g):
        return (g * inside,)

    return Tensor(np.clip(a.data, lo, hi), parents=(a,), vjp=vjp)


def tsum(a: Tensor, axis=None) -> Tensor:
    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return Tensor(a.data.sum(axis=axis), parents=(a,), vjp=vjp)


def tmean(a: Tensor, axis=None) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), Tensor(1.0 / count))


def max_rows(a: Tensor) -> Tensor:
    """Column-wise max over axis 0; gradient flows to the first argmax."""
    idx = np.argmax(a.data, axis=0)

    def vjp(g):
        out = np.zeros_like(a.data)
        out[idx, np.arange(a.data.shape[1])] = g
        return (out,)

    return Tensor(a.data.max(axis=0), parents=(a,), vjp=vjp)


def softmax_vec(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def vjp(g):
        return (out * (g - float(g @ out)),)

    return Tensor(out, parents=(a,), vjp=vjp)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor(a.data[idx], parents=(a,), vjp=vjp)


def spmm(matrix: SparseMatrix, a: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor."""
    transposed = matrix.transpose() if a.requires_grad else None

    def vjp(g):
        return (transposed.dense_matmul(g),)

    return Tensor(matrix.dense_matmul(a.data), parents=(a,), vjp=vjp)


def row_mix(base: np.ndarray, token: Tensor, mask: np.ndarray) -> Tensor:
    """Rows of `base` with masked rows replaced by the (trainable) token."""
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask[:, None], token.data[None, :], base)

    def vjp(g):
        return (g[mask].sum(axis=0),)

    return Tensor(out, parents=(token,), vjp=vjp)


def backward(out: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate gradients of `out` into every reachable requires_grad leaf."""
    if not np.all(np.isfinite(out.data)):
        raise TrainingDivergedError("non-finite value in forward pass")
    if seed is None:
        if out.data.shape != ():
            raise ValueError("backward() without a seed needs a scalar output")
        seed = np.array(1.0)
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != out.data.shape:
        raise ValueError("seed gradient shape must match the output")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    out.grad = seed.copy()
    for node in reversed(topo):
        if node._vjp is None or node.grad is None or not node.requires_grad:
            continue
        for parent, grad in zip(node._parents, node._vjp(node.grad)):
            if not parent.requires_grad or grad is None:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.data)
            parent.grad += grad
