"""Minimal reverse-mode differentiable array engine.

Tensors wrap row-major numpy arrays (float32 by default, float64 for
gradient checking). Every primitive records its parents and a backward
closure; ``backward(loss)`` replays the tape in exact reverse execution
order and accumulates adjoints additively, so fan-out is handled by
summation. One tape per forward pass: the graph hangs off the output
tensors and is dropped when they go out of scope.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


class DiffcoreError(Exception):
    """Base class for numeric-core contract violations."""


class ShapeError(DiffcoreError):
    """Operand dimensions are incompatible."""


class LengthError(DiffcoreError):
    """A convolution produced a degenerate (empty) output length."""


class LabelError(DiffcoreError):
    """A class label is outside [0, K)."""


class NumericError(DiffcoreError):
    """Non-finite values where finite ones are required."""


class GraphError(DiffcoreError):
    """Backward invoked on an invalid root."""


_order_counter = itertools.count()


class Tensor:
    """n-dimensional real array with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_order", "_grad_owned")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._grad_owned = False
        self._parents = ()
        self._backward_fn = None
        self._order = next(_order_counter)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)
        self._grad_owned = True

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_const(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, neg(other))
        return add_const(self, -float(other))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return scale(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def _accumulate(t: Tensor, g: np.ndarray):
    # adjoints are never mutated in place unless this tensor owns the buffer
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
        t._grad_owned = False
    elif t._grad_owned:
        t.grad += g
    else:
        t.grad = t.grad + g
        t._grad_owned = True


def _owned_grad(t: Tensor) -> np.ndarray:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
        t._grad_owned = True
    elif not t._grad_owned:
        t.grad = t.grad.copy()
        t._grad_owned = True
    return t.grad


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def backward(loss: Tensor):
    """Populate ``grad`` on every requires_grad tensor reachable from *loss*."""
    if loss.data.size != 1:
        raise GraphError(f"backward root must be scalar, got shape {loss.data.shape}")
    nodes = []
    seen = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._order, reverse=True)
    loss.grad = np.ones_like(loss.data)
    for t in nodes:
        if t._backward_fn is not None and t.grad is not None:
            t._backward_fn(t.grad)


# ---------------------------------------------------------------------------
# elementwise and structural primitives


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), bwd)


def add_const(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        _accumulate(a, g)

    return _result(a.data + c, (a,), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        _accumulate(a, -g)

    return _result(-a.data, (a,), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def bwd(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        _accumulate(a, g * c)

    return _result(a.data * c, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def bwd(g):
        _accumulate(a, g.reshape(old))

    return _result(a.data.reshape(shape), (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        _accumulate(a, g.transpose(inv))

    return _result(a.data.transpose(axes), (a,), bwd)


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, slice, type(Ellipsis), type(None))) for p in parts)


def take(a: Tensor, index) -> Tensor:
    """Indexing with scatter-add backward."""
    basic = _is_basic_index(index)

    def bwd(g):
        if not a.requires_grad:
            return
        grad = _owned_grad(a)
        if basic:
            grad[index] += g        # views never alias for basic indexing
        else:
            np.add.at(grad, index, g)

    return _result(a.data[index], (a,), bwd)


def stack(tensors, axis=0) -> Tensor:
    tensors = list(tensors)

    def bwd(g):
        pieces = np.split(g, len(tensors), axis=axis)
        for t, piece in zip(tensors, pieces):
            _accumulate(t, np.squeeze(piece, axis=axis))

    return _result(np.stack([t.data for t in tensors], axis=axis), tensors, bwd)


def expand(a: Tensor, axis: int, n: int) -> Tensor:
    """Insert a new axis of size n (repeat); backward sums over it."""

    def bwd(g):
        _accumulate(a, g.sum(axis=axis))

    return _result(np.repeat(np.expand_dims(a.data, axis), n, axis=axis), (a,), bwd)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    shape = a.data.shape

    def bwd(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(gg, shape).copy())

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def bwd(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, shape) / count)
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(gg, shape) / count)

    return _result(a.data.mean(axis=axis, keepdims=keepdims), (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions of {a.data.shape} and {b.data.shape} disagree")

    def _fit(g, shape):
        # collapse broadcast batch axes back onto the operand shape
        extra = g.ndim - len(shape)
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        for i, (gs, s) in enumerate(zip(g.shape[:-2], shape[:-2])):
            if s == 1 and gs != 1:
                g = g.sum(axis=i, keepdims=True)
        return g

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, _fit(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape))
        if b.requires_grad:
            _accumulate(b, _fit(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape))

    return _result(np.matmul(a.data, b.data), (a, b), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: x[..., Cin] @ w[Cin, Cout] + b[Cout]."""
    cin, cout = w.data.shape
    if x.data.shape[-1] != cin:
        raise ShapeError(f"linear: input width {x.data.shape[-1]} != weight fan-in {cin}")
    x2 = x.data.reshape(-1, cin)
    y2 = x2 @ w.data
    if b is not None:
        y2 = y2 + b.data

    def bwd(g):
        g2 = g.reshape(-1, cout)
        if x.requires_grad:
            _accumulate(x, (g2 @ w.data.T).reshape(x.data.shape))
        if w.requires_grad:
            _accumulate(w, x2.T @ g2)
        if b is not None and b.requires_grad:
            _accumulate(b, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _result(y2.reshape(x.data.shape[:-1] + (cout,)), parents, bwd)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, pad: int = 0) -> Tensor:
    """1-D convolution over [N, L, Cin] with kernel [k, Cin, Cout].

    Zero padding; L' = floor((L + 2*pad - k)/stride) + 1; weights shared
    across the leading batch/antenna axis.
    """
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ShapeError(f"conv1d: expected x [N,L,Cin] and w [k,Cin,Cout], got {x.data.shape}, {w.data.shape}")
    n, length, cin = x.data.shape
    k, wcin, cout = w.data.shape
    if wcin != cin:
        raise ShapeError(f"conv1d: input channels {cin} != kernel channels {wcin}")
    if k < 1 or stride < 1 or pad < 0:
        raise ShapeError(f"conv1d: invalid k={k}, stride={stride}, pad={pad}")
    if length + 2 * pad < k:
        raise LengthError(f"conv1d: padded length {length + 2 * pad} shorter than kernel {k}")
    lout = (length + 2 * pad - k) // stride + 1
    if lout < 1:
        raise LengthError(f"conv1d: degenerate output length {lout}")

    xp = np.pad(x.data, ((0, 0), (pad, pad), (0, 0))) if pad else x.data
    idx = stride * np.arange(lout)[:, None] + np.arange(k)[None, :]
    cols = xp[:, idx, :]                      # [N, L', k, Cin]
    cols2 = cols.reshape(n * lout, k * cin)
    w2 = w.data.reshape(k * cin, cout)
    y = cols2 @ w2
    if b is not None:
        y = y + b.data

    def bwd(g):
        g2 = g.reshape(n * lout, cout)
        if x.requires_grad:
            dcols = (g2 @ w2.T).reshape(n, lout, k, cin)
            dxp = np.zeros_like(xp)
            for tap in range(k):        # overlapping windows: accumulate per tap
                dxp[:, tap:tap + stride * lout:stride, :] += dcols[:, :, tap, :]
            _accumulate(x, dxp[:, pad:pad + length, :] if pad else dxp)
        if w.requires_grad:
            _accumulate(w, (cols2.T @ g2).reshape(k, cin, cout))
        if b is not None and b.requires_grad:
            _accumulate(b, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _result(y.reshape(n, lout, cout), parents, bwd)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bwd(g):
        _accumulate(x, g * mask)

    return _result(x.data * mask, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        _accumulate(x, g * y * (1.0 - y))

    return _result(y, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def bwd(g):
        _accumulate(x, g * (1.0 - y * y))

    return _result(y, (x,), bwd)


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction) along *axis*."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax: non-finite input")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(x, y * (g - dot))

    return _result(y, (x,), bwd)


def log_softmax_data(z: np.ndarray, axis: int = -1) -> np.ndarray:
    m = z.max(axis=axis, keepdims=True)
    s = np.exp(z - m).sum(axis=axis, keepdims=True)
    return z - m - np.log(s)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood over a batch of logits [B, K]."""
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be [B,K], got {logits.data.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    bsz, k = logits.data.shape
    if labels.shape != (bsz,):
        raise ShapeError(f"cross_entropy: labels shape {labels.shape} != ({bsz},)")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise LabelError(f"cross_entropy: label outside [0, {k})")
    lsm = log_softmax_data(logits.data)
    loss = -lsm[np.arange(bsz), labels].mean()

    def bwd(g):
        p = np.exp(lsm)
        p[np.arange(bsz), labels] -= 1.0
        _accumulate(logits, (float(g) / bsz) * p)

    return _result(np.asarray(loss, dtype=logits.data.dtype), (logits,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize the last axis, then apply the affine (gamma, beta)."""
    c = x.data.shape[-1]
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeError(f"layer_norm: affine shapes {gamma.data.shape}/{beta.data.shape} != ({c},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = gamma.data * xhat + beta.data

    def bwd(g):
        if x.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * (gx - m1 - xhat * m2))
        lead = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=lead))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=lead))

    return _result(y, (x, gamma, beta), bwd)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor, b: Tensor):
    """One LSTM step: gates i,f,g,o packed along the last axis of wx/wh/b.

    c' = sigmoid(f) * c + sigmoid(i) * tanh(g); h' = sigmoid(o) * tanh(c').
    """
    width = h.data.shape[-1]
    if c.data.shape != h.data.shape:
        raise ShapeError(f"lstm_cell: h {h.data.shape} and c {c.data.shape} differ")
    if wx.data.shape[-1] != 4 * width or wh.data.shape != (width, 4 * width):
        raise ShapeError(
            f"lstm_cell: gate widths {wx.data.shape}/{wh.data.shape} inconsistent with state width {width}")
    return lstm_update(add(linear(x, wx, b), linear(h, wh)), c)


def lstm_update(gates: Tensor, c: Tensor):
    """State update from pre-activation gates [..., 4C] packed i,f,g,o."""
    width = c.data.shape[-1]
    if gates.data.shape[-1] != 4 * width:
        raise ShapeError(
            f"lstm_update: gates width {gates.data.shape[-1]} != 4 * {width}")
    i = sigmoid(gates[..., 0 * width:1 * width])
    f = sigmoid(gates[..., 1 * width:2 * width])
    g = tanh(gates[..., 2 * width:3 * width])
    o = sigmoid(gates[..., 3 * width:4 * width])
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new
