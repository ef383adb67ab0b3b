"""Array-level reverse-mode autodiff.

Each op records its parents and a closure that maps the output gradient to
parent gradients. There is no global tape: ``backward`` walks the graph that
hangs off the loss, so a fresh graph is built on every forward pass.

Parameter leaves carry a ``sink``, a view into a :class:`ParamVector` grad
buffer, and gradients are accumulated into it in place.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import InputShapeError, UsageError

__all__ = [
    "Tensor",
    "as_tensor",
    "dense",
    "concat",
    "minimum",
    "maximum",
    "where_rows",
]


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "sink", "_parents", "_backward", "op")

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False, sink=None, _parents=(), _backward=None, op=""):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.sink = sink
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward, op):
        parents = tuple(p for p in parents)
        if any(p.requires_grad for p in parents):
            return Tensor(data, True, None, parents, backward, op)
        return Tensor(data, False, op=op)

    def backward(self, grad=None):
        if not self.requires_grad or (self._backward is None and self.sink is None):
            raise UsageError("backward() called on a tensor with no recorded forward graph")
        if grad is None:
            if self.data.size != 1:
                raise UsageError("backward() without an explicit gradient needs a scalar loss")
            grad = np.ones_like(self.data)

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.sink is not None:
                node.sink += g
            if node._backward is None:
                if node.sink is None:
                    # plain leaf: keep the gradient on the tensor itself
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- elementwise arithmetic --------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.data.shape, other.data.shape
        return Tensor._make(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
            "add",
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.data.shape, other.data.shape
        return Tensor._make(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)),
            "sub",
        )

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._make(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        out = a / b
        return Tensor._make(
            out,
            (self, other),
            lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * out / b, b.shape)),
            "div",
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def square(self):
        a = self.data
        return Tensor._make(a * a, (self,), lambda g: (2.0 * a * g,), "square")

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,), "exp")

    def log(self):
        a = self.data
        return Tensor._make(np.log(a), (self,), lambda g: (g / a,), "log")

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def softplus(self):
        a = self.data
        out = np.logaddexp(0.0, a)
        sig = 0.5 * (1.0 + np.tanh(0.5 * a))
        return Tensor._make(out, (self,), lambda g: (g * sig,), "softplus")

    def clip(self, low, high):
        a = self.data
        inside = (a >= low) & (a <= high)
        return Tensor._make(np.clip(a, low, high), (self,), lambda g: (g * inside,), "clip")

    # -- reductions and reshaping ------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.data.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(np.asarray(out, dtype=np.float64), (self,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def norm(self, axis=-1, keepdims=False):
        """Euclidean norm along ``axis``; the gradient at a zero vector is taken as 0."""
        a = self.data
        out = np.sqrt((a * a).sum(axis=axis, keepdims=True))

        def backward(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            safe = np.where(out > 0.0, out, 1.0)
            return (np.where(out > 0.0, g * a / safe, 0.0),)

        value = out if keepdims else np.squeeze(out, axis=axis)
        return Tensor._make(value, (self,), backward, "norm")

    def __getitem__(self, index):
        shape = self.data.shape

        def backward(g):
            full = np.zeros(shape)
            full[index] = g
            return (full,)

        return Tensor._make(np.ascontiguousarray(self.data[index]), (self,), backward, "getitem")

    def reshape(self, *shape):
        old = self.data.shape
        return Tensor._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),), "reshape")

    def log_softmax(self):
        """Row-wise log-softmax of a 2-D tensor."""
        z = self.data - self.data.max(axis=1, keepdims=True)
        out = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        soft = np.exp(out)
        return Tensor._make(
            out, (self,), lambda g: (g - soft * g.sum(axis=1, keepdims=True),), "log_softmax"
        )

    def detach(self):
        return Tensor(self.data)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(part) for part in np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def minimum(a, b):
    """Elementwise minimum; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    return Tensor._make(
        np.where(pick_a, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a.data.shape), _unbroadcast(g * ~pick_a, b.data.shape)),
        "minimum",
    )


def maximum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data >= b.data
    return Tensor._make(
        np.where(pick_a, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a.data.shape), _unbroadcast(g * ~pick_a, b.data.shape)),
        "maximum",
    )


def where_rows(mask, a, b):
    """Select rows: ``mask[i]`` picks ``a[i]`` over ``b[i]``."""
    a, b = as_tensor(a), as_tensor(b)
    m = np.asarray(mask, dtype=bool).reshape((-1,) + (1,) * (a.data.ndim - 1))
    return Tensor._make(
        np.where(m, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * m, a.data.shape), _unbroadcast(g * ~m, b.data.shape)),
        "where_rows",
    )


def dense(x, W, b, act):
    """Fused affine map plus activation, ``act(x @ W.T + b)``, via the kernel backend.

    ``W``/``b`` are parameter tensors (or constants when the owning network
    is frozen); ``act`` is an integer activation code.
    """
    x = as_tensor(x)
    xd = x.data
    if xd.ndim != 2 or xd.shape[1] != W.data.shape[1]:
        raise InputShapeError(
            f"dense layer expects input of width {W.data.shape[1]}, got shape {xd.shape}"
        )
    if not xd.flags.c_contiguous:
        xd = np.ascontiguousarray(xd)
    y = kernels.dense_forward(xd, W.data, b.data, act)

    if not (x.requires_grad or W.requires_grad or b.requires_grad):
        return Tensor(y, op="dense")

    def backward(g):
        g = np.ascontiguousarray(g)
        # parameter leaves: write straight into their grad buffers
        w_direct = W.requires_grad and W.sink is not None and W._backward is None
        b_direct = b.requires_grad and b.sink is not None and b._backward is None
        if w_direct:
            gW = W.sink
        else:
            gW = np.zeros_like(W.data) if W.requires_grad else None
        if b_direct:
            gb = b.sink
        else:
            gb = np.zeros_like(b.data) if b.requires_grad else None
        gx = kernels.dense_backward(xd, W.data, y, g, act, gW, gb, x.requires_grad)
        return gx, (None if w_direct else gW), (None if b_direct else gb)

    return Tensor(y, True, None, (x, W, b), backward, "dense")
