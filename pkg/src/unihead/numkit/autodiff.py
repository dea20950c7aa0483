"""Fixed-op reverse-mode tape.

Not a general autodiff: exactly the operations the head needs, each a thin
wrapper around the kernels with a closure backward. A forward pass builds a
graph of Tensors; backward() seeds the scalar root and accumulates grads
into every reachable leaf in a fixed topological order, so two runs give
bitwise-identical gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UsageError
from . import counting, kernels


class Tensor:
    __slots__ = ("data", "grad", "parents", "grad_fn")

    def __init__(self, data, parents=(), grad_fn=None):
        self.data = np.asarray(data)
        self.parents = parents
        self.grad_fn = grad_fn
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, leaf={self.grad_fn is None})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def backward(root: Tensor) -> None:
    """Populate .grad on every tensor reachable from a scalar root."""
    if root.data.size != 1:
        raise UsageError(f"tape root must be scalar, got shape {root.data.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node.grad_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.grad_fn(node.grad)):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# ------------------------------------------------------------ arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    counting.add_non_mac("add", out.size)
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def mul(a, b) -> Tensor:
    """Elementwise product of two activations; counted as MACs (modulation)."""
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    counting.add(out.size)
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.data.shape),
                             _unbroadcast(g * a.data, b.data.shape)))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    counting.add_non_mac("scale", a.data.size)
    return Tensor(a.data * c, (a,), lambda g: (g * c,))


def ssum(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.asarray(a.data.sum()), (a,),
                  lambda g: (np.broadcast_to(g, a.data.shape).copy(),))


# --------------------------------------------------------------- reshape

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return Tensor(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = tuple(np.argsort(axes))
    return Tensor(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, tuple(tensors), bwd)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    a = as_tensor(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return Tensor(a.data[idx].copy(), (a,), bwd)


# ----------------------------------------------------------- linear alg

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = kernels.matmul(a.data, b.data)
    return Tensor(out, (a, b), lambda g: kernels.matmul_bwd(g, a.data, b.data))


def bmm(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = kernels.bmm(a.data, b.data)
    return Tensor(out, (a, b), lambda g: kernels.bmm_bwd(g, a.data, b.data))


def softmax_last(a) -> Tensor:
    a = as_tensor(a)
    y = kernels.softmax_last(a.data)
    return Tensor(y, (a,), lambda g: (kernels.softmax_last_bwd(g, y),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(kernels.relu(a.data), (a,), lambda g: (kernels.relu_bwd(g, a.data),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = kernels.sigmoid(a.data)
    return Tensor(y, (a,), lambda g: (kernels.sigmoid_bwd(g, y),))


def layernorm(x, gain, bias, eps: float) -> Tensor:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    y = kernels.layernorm(x.data, gain.data, bias.data, eps)
    return Tensor(y, (x, gain, bias),
                  lambda g: kernels.layernorm_bwd(g, x.data, gain.data, eps))


def conv2d(x, w, b=None) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    if b is None:
        y = kernels.conv2d(x.data, w.data, None)
        return Tensor(y, (x, w), lambda g: kernels.conv2d_bwd(g, x.data, w.data)[:2])
    b = as_tensor(b)
    y = kernels.conv2d(x.data, w.data, b.data)
    return Tensor(y, (x, w, b), lambda g: kernels.conv2d_bwd(g, x.data, w.data))


def dwconv(x, w, b=None) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    if b is None:
        y = kernels.dwconv(x.data, w.data, None)
        return Tensor(y, (x, w), lambda g: kernels.dwconv_bwd(g, x.data, w.data)[:2])
    b = as_tensor(b)
    y = kernels.dwconv(x.data, w.data, b.data)
    return Tensor(y, (x, w, b), lambda g: kernels.dwconv_bwd(g, x.data, w.data))


def grid_sample(x, pos) -> Tensor:
    x, pos = as_tensor(x), as_tensor(pos)
    y = kernels.grid_sample(x.data, pos.data)
    return Tensor(y, (x, pos), lambda g: kernels.grid_sample_bwd(g, x.data, pos.data))
