"""A small reverse-mode automatic differentiation engine over numpy arrays.

Each :class:`Tensor` records the operation that produced it. Calling
``loss.backward()`` walks the graph in reverse topological order and
accumulates exact gradients into ``.grad`` of every tensor that requires one.

    >>> x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    >>> (x * x).sum().backward()
    >>> x.grad
    array([2., 4.])
"""
from __future__ import annotations

import contextlib

import numpy as np

from .errors import ShapeMismatch

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block; results are plain constants."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _is_basic_index(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, np.integer, type(None), type(Ellipsis))) for i in items)


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        # the first gradient is stored without copying (it may be shared with
        # other nodes), so the sum is only formed in place once we own it
        if self.grad is None:
            self.grad = np.asarray(g, dtype=self.data.dtype)
            self._owned = False
        elif self._owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self._owned = True

    def _accumulate_at(self, idx, g, basic=True):
        """Add ``g`` into ``grad[idx]``; several slices of one tensor share a buffer."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        elif not self._owned:
            self.grad = np.array(self.grad)
        self._owned = True
        if basic:
            self.grad[idx] += g
        else:
            np.add.at(self.grad, idx, g)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable ``.grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other, self)))

    def __rsub__(self, other):
        return add(_lift(other, self), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_lift(other, self), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(_lift(other, self), self)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def __pow__(self, k):
        return power(self, k)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def _lift(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else float
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward):
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data)
    return Tensor(data, True, tuple(parents), backward)


def parameter(data):
    return Tensor(np.asarray(data), requires_grad=True)


# elementwise ----------------------------------------------------------------
def add(a, b):
    a = _lift(a)
    b = _lift(b, a)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def neg(a):
    return _make(-a.data, (a,), lambda g: a._accumulate(-g))


def mul(a, b):
    a = _lift(a)
    b = _lift(b, a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b):
    a = _lift(a)
    b = _lift(b, a)
    out = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * out / b.data, b.shape))

    return _make(out, (a, b), backward)


def power(a, k):
    out = a.data ** k
    return _make(out, (a,), lambda g: a._accumulate(g * k * a.data ** (k - 1)))


def sqrt(a):
    """Square root; the gradient at exactly 0 is taken as 0."""
    out = np.sqrt(a.data)

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        a._accumulate(np.where(out > 0, 0.5 * g / safe, 0.0))

    return _make(out, (a,), backward)


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * out))


def abs_(a):
    return _make(np.abs(a.data), (a,), lambda g: a._accumulate(g * np.sign(a.data)))


def gelu(a):
    """GELU, tanh approximation."""
    x = a.data
    c = np.sqrt(2.0 / np.pi).astype(x.dtype)
    inner = c * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3 * 0.044715 * x * x)
        a._accumulate(g * d)

    return _make(out, (a,), backward)


def silu(a):
    x = a.data
    s = 1.0 / (1.0 + np.exp(-x))
    out = x * s
    return _make(out, (a,), lambda g: a._accumulate(g * (s + x * s * (1.0 - s))))


# linear algebra ----------------------------------------------------------------
def matmul(a, b):
    a = _lift(a)
    b = _lift(b, a)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    if b.ndim == 2 and a.ndim > 2:
        # one large GEMM instead of a loop over the batch dims
        out = (a.data.reshape(-1, a.shape[-1]) @ b.data).reshape(a.shape[:-1] + (b.shape[-1],))
    else:
        out = a.data @ b.data

    def backward(g):
        if b.ndim == 2 and a.ndim > 2:
            g2 = g.reshape(-1, g.shape[-1])
            if a.requires_grad:
                a._accumulate((g2 @ b.data.T).reshape(a.shape))
            if b.requires_grad:
                b._accumulate(a.data.reshape(-1, a.shape[-1]).T @ g2)
            return
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(out, (a, b), backward)


# reductions ---------------------------------------------------------------------
def sum_(a, axis=None, keepdims=False):
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _make(np.asarray(out), (a,), backward)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis, keepdims) * (1.0 / n)


def min_reduce(a, axis=-1):
    """Minimum along one axis; the gradient flows to the first arg-min."""
    idx = np.expand_dims(np.argmin(a.data, axis=axis), axis)
    out = np.take_along_axis(a.data, idx, axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis)
        a._accumulate(full)

    return _make(out, (a,), backward)


# normalization ------------------------------------------------------------------
def layer_norm(a, eps=1e-6):
    """Normalize the last axis to zero mean and unit variance (no affine)."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        a._accumulate(inv * (g - gm - xhat * gx))

    return _make(xhat, (a,), backward)


def softmax(a, axis=-1):
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _make(y, (a,), backward)


# shape ------------------------------------------------------------------------------
def reshape(a, shape):
    return _make(a.data.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(a.shape)))


def swapaxes(a, i, j):
    return _make(np.swapaxes(a.data, i, j), (a,), lambda g: a._accumulate(np.swapaxes(g, i, j)))


def transpose(a, axes):
    inv = np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,), lambda g: a._accumulate(np.transpose(g, inv)))


def slice_(a, idx):
    out = a.data[idx]
    basic = _is_basic_index(idx)

    return _make(np.array(out), (a,), lambda g: a._accumulate_at(idx, g, basic))


def take(table, indices):
    """Row lookup ``table[indices]`` (embedding gather); repeated rows add up."""
    return slice_(table, np.asarray(indices))


def concat(tensors, axis=-1):
    tensors = [_lift(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t._accumulate(np.take(g, np.arange(lo, hi), axis=axis))

    return _make(out, tuple(tensors), backward)


def stack(tensors, axis=-1):
    tensors = [_lift(t) for t in tensors]
    ax = axis if axis >= 0 else tensors[0].ndim + 1 + axis
    expanded = [reshape(t, t.shape[:ax] + (1,) + t.shape[ax:]) for t in tensors]
    return concat(expanded, axis=ax)


# composites ---------------------------------------------------------------------------
def norm(a, axis=-1):
    return sqrt(sum_(a * a, axis=axis))


def cross(a, b):
    a0, a1, a2 = a[..., 0:1], a[..., 1:2], a[..., 2:3]
    b0, b1, b2 = b[..., 0:1], b[..., 1:2], b[..., 2:3]
    return concat([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


GS_FLOOR = 1e-12


def _safe_norm(a):
    # the floor keeps all-zero rows (e.g. an untrained head) finite
    return sqrt(sum_(a * a, axis=-1, keepdims=True) + GS_FLOOR)


def rot6_to_matrix(r):
    """Differentiable Gram-Schmidt of (..., 6) rows into (..., 3, 3) matrices."""
    a1, a2 = r[..., 0:3], r[..., 3:6]
    b1 = a1 / _safe_norm(a1)
    u2 = a2 - (b1 * a2).sum(axis=-1, keepdims=True) * b1
    b2 = u2 / _safe_norm(u2)
    b3 = cross(b1, b2)
    return stack([b1, b2, b3], axis=-1)
