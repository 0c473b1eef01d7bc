"""Differentiable primitives.

Images are channel-last: a single image is ``H x W x C`` and a batch is
``N x H x W x C``. Convolution kernels are ``Kh x Kw x Cin x Cout`` and are
applied as cross-correlation (no flip). Every reduction runs in a fixed index
order so a given input produces bitwise-identical output run to run.
"""
from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor

_corrupt = {"conv2d": False}


@contextlib.contextmanager
def corrupted_backward():
    """Deliberately break the conv2d kernel gradient (mutation testing)."""
    prev = _corrupt["conv2d"]
    _corrupt["conv2d"] = True
    try:
        yield
    finally:
        _corrupt["conv2d"] = prev


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- elementwise

def _pair(a, b) -> tuple[Tensor, Tensor]:
    # plain numbers take the dtype of the tensor operand
    if not isinstance(a, Tensor):
        return as_tensor(a, b), b
    return a, as_tensor(b, a)


def add(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * out / b.data, b.shape)
        return ga, gb

    return Tensor._from_op(out, (a, b), bw, "div")


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data ** exponent

    def bw(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return Tensor._from_op(out, (a,), bw, "pow")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor._from_op(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    ex = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    return Tensor._from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}") from None
    return fn(a)


# ---------------------------------------------------------------- reductions & shape

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._from_op(np.asarray(out), (a,), bw, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        n = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    return Tensor._from_op(a.data.reshape(shape), (a,),
                           lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    inv = None if axes is None else np.argsort(axes)
    return Tensor._from_op(np.transpose(a.data, axes), (a,),
                           lambda g: (np.transpose(g, inv),), "transpose")


def flatten(a: Tensor) -> Tensor:
    """Collapse everything but the leading batch axis."""
    return reshape(a, (a.shape[0], -1))


def norm(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean length along ``axis``; the gradient at the zero vector is 0."""
    out = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g * a.data / safe, 0.0),)

    data = out if keepdims else np.squeeze(out, axis=axis)
    return Tensor._from_op(data, (a,), bw, "norm")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        bd, ad = b.data, a.data
        if bd.ndim == 1:
            ga = np.multiply.outer(g, bd) if ad.ndim > 1 else g * bd
        else:
            ga = g @ np.swapaxes(bd, -1, -2) if ad.ndim > 1 else g @ bd.T
        if ad.ndim == 1:
            gb = np.multiply.outer(ad, g) if bd.ndim > 1 else g * ad
        else:
            gb = np.swapaxes(ad, -1, -2) @ g if bd.ndim > 1 else ad.T @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._from_op(a.data @ b.data, (a, b), bw, "matmul")


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum. Each operand index must appear in the output or in
    the other operand, which keeps the adjoint another einsum."""
    lhs, out_s = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for own, other in ((sa, sb), (sb, sa)):
        if len(set(own)) != len(own) or not set(own) <= set(other) | set(out_s):
            raise ValueError(f"unsupported einsum pattern {subscripts!r}")
    a, b = _pair(a, b)

    def bw(g):
        ga = np.einsum(f"{out_s},{sb}->{sa}", g, b.data)
        gb = np.einsum(f"{out_s},{sa}->{sb}", g, a.data)
        return ga, gb

    return Tensor._from_op(np.einsum(subscripts, a.data, b.data), (a, b), bw, "einsum")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (a,), bw, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse

    def bw(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._from_op(out, (a,), bw, "log_softmax")


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy over a batch of integer labels."""
    labels = np.asarray(labels)
    onehot = np.zeros(logits.shape, dtype=logits.dtype)
    onehot[np.arange(len(labels)), labels] = 1.0
    return neg(mean(sum(mul(log_softmax(logits, axis=-1), onehot), axis=-1)))


def fully_connected(x: Tensor, weights: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weights + bias`` for ``x`` of shape ``(N,)`` or ``(batch, N)``."""
    n_in = x.shape[-1]
    if weights.ndim != 2 or weights.shape[0] != n_in:
        raise ValueError(f"fully_connected: input length {n_in} does not match weights {weights.shape}")
    if bias is not None and bias.shape != (weights.shape[1],):
        raise ValueError(f"fully_connected: bias shape {bias.shape} != ({weights.shape[1]},)")
    out = matmul(x, weights)
    return out if bias is None else add(out, bias)


# ---------------------------------------------------------------- spatial ops

def _out_extent(size: int, k: int, stride: int) -> int:
    return (size - k) // stride + 1


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 4:
        raise ValueError(f"expected HxWxC or NxHxWxC input, got shape {x.shape}")
    return x, False


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad both spatial axes of an ``N x H x W x C`` tensor."""
    if pad == 0:
        return x
    widths = ((0, 0), (pad, pad), (pad, pad), (0, 0))

    def bw(g):
        return (g[:, pad:-pad, pad:-pad, :],)

    return Tensor._from_op(np.pad(x.data, widths), (x,), bw, "pad2d")


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, padding: str = "valid") -> Tensor:
    """Channel-summed cross-correlation, im2col + one GEMM.

    ``padding`` is ``"valid"`` or ``"same"`` (odd kernels, stride 1 only; used
    by the residual blocks).
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    x, single = _batched(x)
    kh, kw, cin, cout = kernels.shape
    if x.shape[3] != cin:
        raise ValueError(f"conv2d: input has {x.shape[3]} channels, kernels expect {cin}")
    if padding == "same":
        if kh != kw or kh % 2 == 0 or stride != 1:
            raise ValueError("same padding needs a square odd kernel and stride 1")
        x = pad2d(x, kh // 2)
    elif padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    n, h, w, _ = x.shape
    if kh > h or kw > w:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than input {h}x{w}")
    ho, wo = _out_extent(h, kh, stride), _out_extent(w, kw, stride)

    win = sliding_window_view(x.data, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    # (n, ho, wo, cin, kh, kw) -> rows ordered (kh, kw, cin) to match the kernel layout
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, kh * kw * cin)
    kmat = kernels.data.reshape(kh * kw * cin, cout)
    out = (cols @ kmat).reshape(n, ho, wo, cout)

    def bw(g):
        g2 = g.reshape(n * ho * wo, cout)
        gk = (cols.T @ g2).reshape(kernels.shape)
        if _corrupt["conv2d"]:
            gk = gk * 0.5
        gx = None
        if x.requires_grad:
            gcols = (g2 @ kmat.T).reshape(n, ho, wo, kh, kw, cin)
            gx = np.zeros(x.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gx[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :] += gcols[:, :, :, i, j, :]
        return gx, gk

    res = Tensor._from_op(out, (x, kernels), bw, "conv2d")
    return reshape(res, res.shape[1:]) if single else res


def _pool_windows(x: Tensor, window: int, stride: int):
    if window < 1 or stride < 1:
        raise ValueError(f"pool window and stride must be >= 1, got {window}, {stride}")
    n, h, w, c = x.shape
    if window > h or window > w:
        raise ValueError(f"pool window {window} larger than input {h}x{w}")
    ho, wo = _out_extent(h, window, stride), _out_extent(w, window, stride)
    win = sliding_window_view(x.data, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    return win, ho, wo


def pool_avg(x: Tensor, window: int, stride: int | None = None) -> Tensor:
    stride = window if stride is None else stride
    x, single = _batched(x)
    win, ho, wo = _pool_windows(x, window, stride)
    out = win.mean(axis=(4, 5))
    scale = 1.0 / (window * window)

    def bw(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        gs = g * scale
        for i in range(window):
            for j in range(window):
                gx[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :] += gs
        return (gx,)

    res = Tensor._from_op(out, (x,), bw, "pool_avg")
    return reshape(res, res.shape[1:]) if single else res


def pool_max(x: Tensor, window: int, stride: int | None = None) -> Tensor:
    """Max pooling; ties go to the first cell in row-major window order."""
    stride = window if stride is None else stride
    x, single = _batched(x)
    win, ho, wo = _pool_windows(x, window, stride)
    n, _, _, c = x.shape
    flat = win.reshape(n, ho, wo, c, window * window)
    arg = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        for i in range(window):
            for j in range(window):
                hit = arg == i * window + j
                gx[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :] += g * hit
        return (gx,)

    res = Tensor._from_op(out, (x,), bw, "pool_max")
    return reshape(res, res.shape[1:]) if single else res


def global_avg_pool(x: Tensor) -> Tensor:
    """``N x H x W x C`` -> ``N x C``."""
    return mean(x, axis=(1, 2))


# ---------------------------------------------------------------- operator sugar

def _attach():
    T = Tensor
    T.__add__ = lambda s, o: add(s, o)
    T.__radd__ = lambda s, o: add(o, s)
    T.__sub__ = lambda s, o: sub(s, o)
    T.__rsub__ = lambda s, o: sub(o, s)
    T.__mul__ = lambda s, o: mul(s, o)
    T.__rmul__ = lambda s, o: mul(o, s)
    T.__truediv__ = lambda s, o: div(s, o)
    T.__rtruediv__ = lambda s, o: div(o, s)
    T.__neg__ = lambda s: neg(s)
    T.__pow__ = lambda s, e: power(s, e)
    T.__matmul__ = lambda s, o: matmul(s, o)
    T.sum = lambda s, axis=None, keepdims=False: sum(s, axis, keepdims)
    T.mean = lambda s, axis=None, keepdims=False: mean(s, axis, keepdims)
    T.reshape = lambda s, *shape: reshape(s, shape[0] if len(shape) == 1 else shape)
    T.transpose = lambda s, *axes: transpose(s, axes or None)


_attach()
