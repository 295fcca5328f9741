"""Dense n-d arrays with reverse-mode automatic differentiation.

A deliberately small engine: numpy arrays wrapped in :class:`Tensor`, a
thread-local tape (:class:`Graph`) that records the backward closure of each
op in append order, and the fixed op set the audio pipeline needs.  Opening
a ``Graph`` context enables recording; without one, ops run forward-only
(inference mode).

    with Graph() as g:
        loss = bce_with_logits(model(x), targets)
        g.backward(loss)

Float32 is the working precision; every op also accepts float64 tensors,
which is what the finite-difference gradient tests run in.
"""

from __future__ import annotations

import threading

import numpy as np

from . import kernels

DEFAULT_DTYPE = np.float32

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested op."""


class GraphError(RuntimeError):
    """Tape misuse: backward on a consumed graph, non-scalar root, etc."""


class Tensor:
    """A numpy array plus a gradient slot.

    ``requires_grad`` marks leaves (parameters); intermediate op outputs are
    tracked automatically while a Graph is active.  ``grad`` holds the
    accumulated gradient after ``Graph.backward`` and matches ``data``'s
    shape.
    """

    __slots__ = ("data", "requires_grad", "grad", "_traced")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._traced = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype}{flag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)


_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "graphs"):
        _local.graphs = []
    return _local.graphs


def _active():
    s = _stack()
    return s[-1] if s else None


class Graph:
    """Append-only tape of backward closures; one thread, one backward pass."""

    def __init__(self):
        self._tape = []
        self._consumed = False

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        popped = _stack().pop()
        if popped is not self:
            raise GraphError("graph contexts exited out of order")
        return False

    def __len__(self):
        return len(self._tape)

    def _record(self, out: Tensor, fn):
        self._tape.append((out, fn))

    def backward(self, root: Tensor):
        """Backpropagate from scalar ``root`` through the tape in reverse."""
        if self._consumed:
            raise GraphError("backward already ran on this graph")
        self._consumed = True
        if root.size != 1:
            raise GraphError(f"backward root must be scalar, got shape {root.shape}")
        root.grad = np.ones_like(root.data)
        for out, fn in reversed(self._tape):
            if out.grad is not None:
                fn(out.grad)


def no_grad_active() -> bool:
    return _active() is None


def _needs(t: Tensor) -> bool:
    return t.requires_grad or t._traced


def _accum(t: Tensor, g: np.ndarray):
    if not _needs(t):
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _make(out_data, inputs, backward) -> Tensor:
    out = Tensor(out_data)
    g = _active()
    if g is not None and any(_needs(i) for i in inputs):
        out._traced = True
        g._record(out, backward)
    return out


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, _as_tensor(b, a)
    return _as_tensor(a, b), b


def _broadcast_check(a: Tensor, b: Tensor, opname: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes the forward op broadcast."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b):
    a, b = _pair(a, b)
    _broadcast_check(a, b, "add")

    def backward(go):
        _accum(a, _unbroadcast(go, a.shape))
        _accum(b, _unbroadcast(go, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = _pair(a, b)
    _broadcast_check(a, b, "sub")

    def backward(go):
        _accum(a, _unbroadcast(go, a.shape))
        _accum(b, _unbroadcast(-go, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = _pair(a, b)
    _broadcast_check(a, b, "mul")

    def backward(go):
        _accum(a, _unbroadcast(go * b.data, a.shape))
        _accum(b, _unbroadcast(go * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = _pair(a, b)
    _broadcast_check(a, b, "div")

    def backward(go):
        _accum(a, _unbroadcast(go / b.data, a.shape))
        _accum(b, _unbroadcast(-go * a.data / (b.data * b.data), b.shape))

    return _make(a.data / b.data, (a, b), backward)


def neg(a):
    a = _as_tensor(a)

    def backward(go):
        _accum(a, -go)

    return _make(-a.data, (a,), backward)


def absolute(a):
    a = _as_tensor(a)
    sign = np.sign(a.data)

    def backward(go):
        _accum(a, go * sign)

    return _make(np.abs(a.data), (a,), backward)


def sin(a):
    a = _as_tensor(a)

    def backward(go):
        _accum(a, go * np.cos(a.data))

    return _make(np.sin(a.data), (a,), backward)


def sqrt(a):
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def backward(go):
        _accum(a, go * (0.5 / out_data))

    return _make(out_data, (a,), backward)


def log1p(a):
    a = _as_tensor(a)

    def backward(go):
        _accum(a, go / (1.0 + a.data))

    return _make(np.log1p(a.data), (a,), backward)


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(go):
        _accum(a, go * mask)

    return _make(np.where(mask, a.data, 0), (a,), backward)


def _sigmoid_data(x: np.ndarray) -> np.ndarray:
    # exp(-softplus(-x)): saturates cleanly at both tails
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a):
    a = _as_tensor(a)
    out_data = _sigmoid_data(a.data)

    def backward(go):
        _accum(a, go * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def softplus(a):
    a = _as_tensor(a)

    def backward(go):
        _accum(a, go * _sigmoid_data(a.data))

    return _make(np.logaddexp(0.0, a.data), (a,), backward)


# ---------------------------------------------------------------------------
# linear algebra and shape ops

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(go):
        _accum(a, go @ b.data.T)
        _accum(b, a.data.T @ go)

    return _make(a.data @ b.data, (a, b), backward)


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.shape

    def backward(go):
        _accum(a, go.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward)


def transpose(a, axes=None):
    a = _as_tensor(a)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))

    def backward(go):
        _accum(a, go.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), backward)


def concat(tensors, axis=0):
    ts = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(go):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * go.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, go[tuple(idx)])

    return _make(np.concatenate([t.data for t in ts], axis=axis), ts, backward)


def _expand_reduced(go, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(go, shape)
    axes = axis if isinstance(axis, tuple) else (axis,)
    if not keepdims:
        for ax in sorted(a % len(shape) for a in axes):
            go = np.expand_dims(go, ax)
    return np.broadcast_to(go, shape)


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)

    def backward(go):
        _accum(a, _expand_reduced(go, a.shape, axis, keepdims).astype(a.dtype, copy=False))

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    scale = a.size / max(out_data.size, 1)

    def backward(go):
        _accum(a, (_expand_reduced(go, a.shape, axis, keepdims) / scale).astype(a.dtype, copy=False))

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# convolutions and pooling

def conv1d_same(signal, kernel):
    """Centered same-length linear convolution of ``signal`` [..., T] with ``kernel`` [L].

    L must be odd; zero padding of (L-1)/2 keeps the output length equal to T.
    Differentiable wrt both arguments.
    """
    signal, kernel = _as_tensor(signal), _as_tensor(kernel)
    if kernel.ndim != 1:
        raise ShapeError(f"conv1d_same: kernel must be 1-D, got shape {kernel.shape}")
    length = kernel.shape[0]
    if length % 2 == 0:
        raise ShapeError(f"conv1d_same: kernel length must be odd, got {length}")
    if signal.ndim < 1 or signal.size == 0:
        raise ShapeError("conv1d_same: signal must have at least one sample")
    common = np.result_type(signal.dtype, kernel.dtype)
    t_len = signal.shape[-1]
    x2 = np.ascontiguousarray(signal.data.reshape(-1, t_len), dtype=common)
    kdata = np.ascontiguousarray(kernel.data, dtype=common)
    out_data = kernels.conv1d_same_forward(x2, kdata).reshape(signal.shape)

    def backward(go):
        g2 = np.ascontiguousarray(go.reshape(-1, t_len), dtype=common)
        if _needs(signal):
            flipped = kdata[::-1].copy()
            gx = kernels.conv1d_same_forward(g2, flipped).reshape(signal.shape)
            _accum(signal, gx.astype(signal.dtype, copy=False))
        if _needs(kernel):
            gk = kernels.conv1d_same_grad_kernel(x2, g2, length)
            _accum(kernel, gk.astype(kernel.dtype, copy=False))

    return _make(out_data, (signal, kernel), backward)


def _pair_arg(v, name):
    if isinstance(v, int):
        return (v, v)
    pair = tuple(v)
    if len(pair) != 2:
        raise ShapeError(f"conv2d: {name} must be an int or a pair")
    return pair


def conv2d(x, w, stride=1, padding=0):
    """Cross-correlate ``x`` [B,C,H,W] with weights ``w`` [O,C,kh,kw]."""
    x, w = _as_tensor(x), _as_tensor(w)
    stride = _pair_arg(stride, "stride")
    padding = _pair_arg(padding, "padding")
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input and weights, got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: channel mismatch, input has {x.shape[1]}, weights expect {w.shape[1]}")
    ho = (x.shape[2] + 2 * padding[0] - w.shape[2]) // stride[0] + 1
    wo = (x.shape[3] + 2 * padding[1] - w.shape[3]) // stride[1] + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {w.shape[2:]} too large for input {x.shape[2:]} with padding {padding}")
    common = np.result_type(x.dtype, w.dtype)
    xd = np.ascontiguousarray(x.data, dtype=common)
    wd = np.ascontiguousarray(w.data, dtype=common)
    out_data = kernels.conv2d_forward(xd, wd, stride, padding)

    def backward(go):
        go = np.ascontiguousarray(go, dtype=common)
        if _needs(x):
            gx = kernels.conv2d_grad_input(go, wd, xd.shape, stride, padding)
            _accum(x, gx.astype(x.dtype, copy=False))
        if _needs(w):
            gw = kernels.conv2d_grad_weight(xd, go, wd.shape, stride, padding)
            _accum(w, gw.astype(w.dtype, copy=False))

    return _make(out_data, (x, w), backward)


def mean_pool(x, k: int):
    """Non-overlapping k x k average pooling over the last two axes."""
    x = _as_tensor(x)
    b, c, h, w = x.shape
    if h % k or w % k:
        raise ShapeError(f"mean_pool: spatial dims {(h, w)} not divisible by {k}")
    blocks = x.data.reshape(b, c, h // k, k, w // k, k)
    out_data = blocks.mean(axis=(3, 5))

    def backward(go):
        g = np.repeat(np.repeat(go, k, axis=2), k, axis=3) / (k * k)
        _accum(x, g.astype(x.dtype, copy=False))

    return _make(out_data, (x,), backward)


def global_avg_pool(x):
    """Mean over the spatial axes of [B,C,H,W] -> [B,C]."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: need 4-D input, got {x.shape}")
    return mean(x, axis=(2, 3))


def linear(x, w, b=None):
    """Affine map [B,Din] @ [Din,Dout] (+ bias)."""
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


# ---------------------------------------------------------------------------
# losses

def bce_with_logits(logits, targets):
    """Mean binary cross entropy on raw logits, in the stable fused form."""
    logits = _as_tensor(logits)
    tdata = targets.data if isinstance(targets, Tensor) else np.asarray(targets)
    if tdata.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs targets {tdata.shape}")
    if not np.isin(tdata, (0.0, 1.0)).all():
        raise ValueError("bce_with_logits: targets must be exactly 0 or 1")
    t = tdata.astype(logits.dtype, copy=False)
    # -[t log sigma(z) + (1-t) log(1-sigma(z))] == softplus(-z) + (1-t) z
    return mean(add(softplus(neg(logits)), mul(Tensor(1.0 - t), logits)))


def cross_entropy(logits, labels):
    """Mean negative log-softmax at the true class; stable log-sum-exp."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be [B, C], got {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"cross_entropy: labels must be [{n}], got {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    loss = (lse - z[np.arange(n), labels]).mean()

    def backward(go):
        p = np.exp(z - m)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), labels] -= 1.0
        _accum(logits, (go * p / n).astype(logits.dtype, copy=False))

    return _make(np.asarray(loss, dtype=logits.dtype), (logits,), backward)
