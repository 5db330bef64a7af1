"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and remembers how it was produced; calling
backward() on a scalar walks the recorded graph in reverse topological order
and accumulates gradients into every tensor that requires them.  The recorded
graph is the tape: one forward pass, one backward pass, then the graph is
garbage collected with the tensors.

Primitives keep their backward rules fused (layer normalization, softmax)
where the composed form would be slow or unstable; everything else is built
from the basics.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum grad down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # sum away prepended axes
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # sum axes that were broadcast from size 1
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            raise TypeError("cannot wrap a Tensor in a Tensor")
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- graph bookkeeping -------------------------------------------------

    @staticmethod
    def _make(data: Array, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, g: Array):
        # grads are never mutated in place, so sharing g is safe
        self.grad = g if self.grad is None else self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- elementwise arithmetic ---------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        o = self._coerce(other)
        out_data = self.data + o.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if o.requires_grad:
                o._accumulate(_unbroadcast(g, o.data.shape))

        return Tensor._make(out_data, (self, o), bw)

    __radd__ = __add__

    def __neg__(self):
        def bw(g):
            self._accumulate(-g)

        return Tensor._make(-self.data, (self,), bw)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        out_data = self.data * o.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * o.data, self.data.shape))
            if o.requires_grad:
                o._accumulate(_unbroadcast(g * self.data, o.data.shape))

        return Tensor._make(out_data, (self, o), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        out_data = self.data / o.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / o.data, self.data.shape))
            if o.requires_grad:
                o._accumulate(
                    _unbroadcast(-g * self.data / (o.data * o.data), o.data.shape)
                )

        return Tensor._make(out_data, (self, o), bw)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, p: float):
        if not isinstance(p, (int, float)):
            raise TypeError("only constant exponents are supported")
        out_data = self.data ** p

        def bw(g):
            self._accumulate(g * p * self.data ** (p - 1))

        return Tensor._make(out_data, (self,), bw)

    def __matmul__(self, other):
        o = self._coerce(other)
        out_data = self.data @ o.data

        def bw(g):
            if self.requires_grad:
                ga = g @ np.swapaxes(o.data, -1, -2)
                self._accumulate(_unbroadcast(ga, self.data.shape))
            if o.requires_grad:
                gb = np.swapaxes(self.data, -1, -2) @ g
                o._accumulate(_unbroadcast(gb, o.data.shape))

        return Tensor._make(out_data, (self, o), bw)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        orig = self.data.shape
        out_data = self.data.reshape(shape)

        def bw(g):
            self._accumulate(g.reshape(orig))

        return Tensor._make(out_data, (self,), bw)

    def swapaxes(self, a: int, b: int):
        out_data = np.swapaxes(self.data, a, b)

        def bw(g):
            self._accumulate(np.swapaxes(g, a, b))

        return Tensor._make(out_data, (self,), bw)

    def __getitem__(self, idx):
        # basic (slice/ellipsis/int) indexing only; selections that may
        # repeat an index must go through take_frames for a correct
        # scatter-add backward
        out_data = self.data[idx]

        def bw(g):
            gx = np.zeros_like(self.data)
            gx[idx] += g
            self._accumulate(gx)

        return Tensor._make(out_data, (self,), bw)

    def broadcast_to(self, shape: tuple[int, ...]):
        out_data = np.broadcast_to(self.data, shape)

        def bw(g):
            self._accumulate(_unbroadcast(g, self.data.shape))

        return Tensor._make(out_data, (self,), bw)

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
                return
            gg = g
            if not keepdims:
                gg = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(gg, self.data.shape).copy())

        return Tensor._make(out_data, (self,), bw)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = 1
            for a in axes:
                n *= self.data.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


# ---------------------------------------------------------------------------
# free functions
# ---------------------------------------------------------------------------

def _unary(x: Tensor, out_data: Array, dydx: Array) -> Tensor:
    def bw(g):
        x._accumulate(g * dydx)

    return Tensor._make(out_data, (x,), bw)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _unary(x, y, y)


def log(x: Tensor) -> Tensor:
    return _unary(x, np.log(x.data), 1.0 / x.data)


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return _unary(x, y, 0.5 / y)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _unary(x, y, 1.0 - y * y)


def _stable_sigmoid(a: Array) -> Array:
    # e^{-|a|} never overflows
    z = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(x: Tensor) -> Tensor:
    y = _stable_sigmoid(x.data)
    return _unary(x, y, y * (1.0 - y))


def silu(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)
    return _unary(x, x.data * s, s * (1.0 + x.data * (1.0 - s)))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    # tanh approximation, matching the usual transformer implementation
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)
    y = 0.5 * x.data * (1.0 + t)
    du = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
    dydx = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du
    return _unary(x, y, dydx)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _unary(x, np.where(mask, x.data, 0.0), mask.astype(np.float64))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.data > 0
    return _unary(x, np.where(mask, x.data, slope * x.data),
                  np.where(mask, 1.0, slope))


def softplus(x: Tensor) -> Tensor:
    # stable: log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    y = np.maximum(x.data, 0.0) + np.log1p(np.exp(-np.abs(x.data)))
    return _unary(x, y, _stable_sigmoid(x.data))


def absolute(x: Tensor) -> Tensor:
    return _unary(x, np.abs(x.data), np.sign(x.data))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; the smaller branch receives the gradient, ties
    go to the first argument.
    """
    take_a = a.data <= b.data
    out_data = np.where(take_a, a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(take_a, g, 0.0), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(take_a, 0.0, g), b.data.shape))

    return Tensor._make(out_data, (a, b), bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        gy = g * y
        x._accumulate(gy - y * gy.sum(axis=axis, keepdims=True))

    return Tensor._make(y, (x,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def bw(g):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.data.shape))
        if x.requires_grad:
            gg = g * gain.data
            m1 = gg.mean(axis=-1, keepdims=True)
            m2 = (gg * xhat).mean(axis=-1, keepdims=True)
            x._accumulate((gg - m1 - xhat * m2) * inv)

    return Tensor._make(out_data, (x, gain, bias), bw)


def concatenate(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        parts = np.split(g, splits, axis=axis)
        for t, p in zip(tensors, parts):
            if t.requires_grad:
                t._accumulate(p)

    return Tensor._make(out_data, tuple(tensors), bw)


def take_frames(x: Tensor, indices: np.ndarray) -> Tensor:
    """Select frames (rows along the second-to-last axis).  Backward
    scatter-adds, so repeated indices accumulate.
    """
    idx = np.asarray(indices, dtype=np.int64)
    out_data = np.take(x.data, idx, axis=-2)

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (Ellipsis, idx, slice(None)), g)
        x._accumulate(gx)

    return Tensor._make(out_data, (x,), bw)


def where_mask(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select from a where a fixed boolean mask holds, else from b.  The
    mask itself is constant data, never differentiated.
    """
    m = np.asarray(mask, dtype=bool)
    out_data = np.where(m, a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(m, g, 0.0), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(m, 0.0, g), b.data.shape))

    return Tensor._make(out_data, (a, b), bw)
