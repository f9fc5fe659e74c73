"""Differentiable ops and their functional wrappers."""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .core import Function, Tensor, as_tensor

Axis = int | tuple[int, ...] | None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out the axes numpy broadcasting added or stretched."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for dim, extent in enumerate(shape):
        if extent == 1 and grad.shape[dim] != 1:
            grad = grad.sum(axis=dim, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


def _axes(axis: Axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _expand(grad: np.ndarray, shape: tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    """Broadcast a reduced gradient back to the pre-reduction shape."""
    if not keepdims:
        grad = np.expand_dims(grad, _axes(axis, len(shape)))
    return np.broadcast_to(grad, shape)


# ---------------------------------------------------------------------------
# elementwise binary
# ---------------------------------------------------------------------------


class Add(Function):
    op = "add"

    def forward(self, a, b):
        _broadcast_shape(self.op, a, b)
        self.saved = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        sa, sb = self.saved
        return _unbroadcast(grad, sa), _unbroadcast(grad, sb)


class Sub(Function):
    op = "sub"

    def forward(self, a, b):
        _broadcast_shape(self.op, a, b)
        self.saved = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        sa, sb = self.saved
        return _unbroadcast(grad, sa), _unbroadcast(-grad, sb)


class Mul(Function):
    op = "mul"

    def forward(self, a, b):
        _broadcast_shape(self.op, a, b)
        self.saved = (a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Div(Function):
    op = "div"

    def forward(self, a, b):
        _broadcast_shape(self.op, a, b)
        self.saved = (a, b)
        return a / b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad / b, a.shape), _unbroadcast(-grad * a / (b * b), b.shape)


class MatMul(Function):
    op = "matmul"

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"{self.op}: incompatible shapes {a.shape} @ {b.shape}")
        self.saved = (a, b)
        return a @ b

    def backward(self, grad):
        a, b = self.saved
        return grad @ b.T, a.T @ grad


# ---------------------------------------------------------------------------
# elementwise unary
# ---------------------------------------------------------------------------


class Relu(Function):
    op = "relu"

    def forward(self, x):
        self.saved = (x > 0,)
        return np.where(x > 0, x, 0).astype(x.dtype)

    def backward(self, grad):
        (mask,) = self.saved
        return (grad * mask,)


class Exp(Function):
    op = "exp"

    def forward(self, x):
        out = np.exp(x)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (grad * out,)


class Log(Function):
    op = "log"

    def forward(self, x):
        self.saved = (x,)
        return np.log(x)

    def backward(self, grad):
        (x,) = self.saved
        return (grad / x,)


class Sqrt(Function):
    op = "sqrt"

    def forward(self, x):
        out = np.sqrt(x)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (grad / (2 * out),)


class Abs(Function):
    op = "abs"

    def forward(self, x):
        self.saved = (np.sign(x),)
        return np.abs(x)

    def backward(self, grad):
        (sign,) = self.saved
        return (grad * sign,)


class Square(Function):
    op = "square"

    def forward(self, x):
        self.saved = (x,)
        return x * x

    def backward(self, grad):
        (x,) = self.saved
        return (2 * grad * x,)


class Clamp(Function):
    op = "clamp"

    def forward(self, x, *, lo: float | None, hi: float | None):
        lo_ = -np.inf if lo is None else lo
        hi_ = np.inf if hi is None else hi
        self.saved = ((x >= lo_) & (x <= hi_),)
        return np.clip(x, lo_, hi_).astype(x.dtype)

    def backward(self, grad):
        (mask,) = self.saved
        return (grad * mask,)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


class Sum(Function):
    op = "sum"

    def forward(self, x, *, axis: Axis, keepdims: bool):
        self.saved = (x.shape, axis, keepdims)
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axis, keepdims = self.saved
        return (_expand(grad, shape, axis, keepdims),)


class Mean(Function):
    op = "mean"

    def forward(self, x, *, axis: Axis, keepdims: bool):
        count = int(np.prod([x.shape[a] for a in _axes(axis, x.ndim)]))
        self.saved = (x.shape, axis, keepdims, count)
        return np.mean(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axis, keepdims, count = self.saved
        return (_expand(grad, shape, axis, keepdims) / count,)


class Var(Function):
    op = "var"

    def forward(self, x, *, axis: int, ddof: int, keepdims: bool):
        n = x.shape[axis]
        if n - ddof <= 0:
            raise ShapeError(f"{self.op}: need more than {ddof} element(s) on axis {axis}, shape {x.shape}")
        centered = x - x.mean(axis=axis, keepdims=True)
        self.saved = (centered, axis, keepdims, n - ddof)
        return np.var(x, axis=axis, ddof=ddof, keepdims=keepdims)

    def backward(self, grad):
        centered, axis, keepdims, dof = self.saved
        g = _expand(grad, centered.shape, axis, keepdims)
        return (g * 2 * centered / dof,)


class Softmax(Function):
    op = "softmax"

    def forward(self, x, *, axis: int):
        e = np.exp(x - x.max(axis=axis, keepdims=True))
        out = e / e.sum(axis=axis, keepdims=True)
        self.saved = (out, axis)
        return out

    def backward(self, grad):
        out, axis = self.saved
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)


class LogSoftmax(Function):
    op = "log_softmax"

    def forward(self, x, *, axis: int):
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.saved = (out, axis)
        return out

    def backward(self, grad):
        out, axis = self.saved
        return (grad - np.exp(out) * grad.sum(axis=axis, keepdims=True),)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


class Reshape(Function):
    op = "reshape"

    def forward(self, x, *, shape: tuple[int, ...]):
        try:
            out = x.reshape(shape)
        except ValueError:
            raise ShapeError(f"{self.op}: cannot reshape {x.shape} to {shape}") from None
        self.saved = (x.shape,)
        return out

    def backward(self, grad):
        (shape,) = self.saved
        return (grad.reshape(shape),)


class Transpose(Function):
    op = "transpose"

    def forward(self, x):
        if x.ndim != 2:
            raise ShapeError(f"{self.op}: expected a 2-d tensor, got shape {x.shape}")
        return x.T

    def backward(self, grad):
        return (grad.T,)


class Concat(Function):
    op = "concat"

    def forward(self, *xs, axis: int):
        ref = xs[0].shape
        ax = axis % len(ref)
        for x in xs[1:]:
            if x.ndim != len(ref) or any(x.shape[d] != ref[d] for d in range(len(ref)) if d != ax):
                raise ShapeError(f"{self.op}: shapes {[x.shape for x in xs]} differ off axis {axis}")
        self.saved = (np.cumsum([x.shape[ax] for x in xs])[:-1], ax)
        return np.concatenate(xs, axis=ax)

    def backward(self, grad):
        splits, ax = self.saved
        return tuple(np.split(grad, splits, axis=ax))


class GetItem(Function):
    op = "slice"

    def forward(self, x, *, idx: Any):
        self.saved = (x.shape, x.dtype, idx)
        return np.array(x[idx])

    def backward(self, grad):
        shape, dtype, idx = self.saved
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, idx, grad)
        return (out,)


class Gather(Function):
    """Pick ``index[i, j]`` from row ``i`` of a 2-d tensor."""

    op = "gather"

    def forward(self, x, *, index: np.ndarray):
        if x.ndim != 2 or index.ndim != 2 or index.shape[0] != x.shape[0]:
            raise ShapeError(f"{self.op}: rows of {x.shape} and index {index.shape} differ")
        self.saved = (x.shape, x.dtype, index)
        return np.take_along_axis(x, index, axis=1)

    def backward(self, grad):
        shape, dtype, index = self.saved
        out = np.zeros(shape, dtype=dtype)
        rows = np.arange(shape[0])[:, None]
        np.add.at(out, (np.broadcast_to(rows, index.shape), index), grad)
        return (out,)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


class Conv1d(Function):
    """Cross-correlation of (N, C_in, L) with (C_out, C_in, K) plus bias."""

    op = "conv1d"

    def forward(self, x, w, b=None, *, stride: int, padding: int):
        if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"{self.op}: input {x.shape} does not match kernel {w.shape}")
        if b is not None and b.shape != (w.shape[0],):
            raise ShapeError(f"{self.op}: bias {b.shape} does not match kernel {w.shape}")
        kernel = w.shape[2]
        length = x.shape[2] + 2 * padding
        lout = (length - kernel) // stride + 1
        if lout < 1:
            raise ShapeError(f"{self.op}: input length {x.shape[2]} too short for kernel {kernel}")
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
        cols = sliding_window_view(xp, kernel, axis=2)[:, :, ::stride, :][:, :, :lout]
        out = np.tensordot(cols, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
        if b is not None:
            out = out + b[None, :, None]
        self.saved = (cols, w, x.shape, stride, padding, b is not None)
        return np.ascontiguousarray(out)

    def backward(self, grad):
        cols, w, xshape, stride, padding, has_bias = self.saved
        lout = grad.shape[2]
        kernel = w.shape[2]
        gw = np.tensordot(grad, cols, axes=([0, 2], [0, 2]))
        gcols = np.tensordot(grad, w, axes=([1], [0])).transpose(0, 2, 1, 3)
        gxp = np.zeros((xshape[0], xshape[1], xshape[2] + 2 * padding), dtype=grad.dtype)
        span = stride * (lout - 1) + 1
        for k in range(kernel):
            gxp[:, :, k:k + span:stride] += gcols[:, :, :, k]
        gx = gxp[:, :, padding:padding + xshape[2]] if padding else gxp
        if has_bias:
            return gx, gw, grad.sum(axis=(0, 2))
        return gx, gw


class ScaleShift(Function):
    """Per-channel affine map on axis 1 (normalization-free stand-in for batchnorm)."""

    op = "scale_shift"

    def forward(self, x, scale, shift):
        if x.ndim < 2 or scale.shape != (x.shape[1],) or shift.shape != (x.shape[1],):
            raise ShapeError(f"{self.op}: input {x.shape}, scale {scale.shape}, shift {shift.shape}")
        view = (1, -1) + (1,) * (x.ndim - 2)
        self.saved = (x, scale, view)
        return x * scale.reshape(view) + shift.reshape(view)

    def backward(self, grad):
        x, scale, view = self.saved
        axes = (0,) + tuple(range(2, x.ndim))
        return grad * scale.reshape(view), (grad * x).sum(axis=axes), grad.sum(axis=axes)


# ---------------------------------------------------------------------------
# functional wrappers
# ---------------------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def div(a: Any, b: Any) -> Tensor:
    return Div.apply(as_tensor(a), as_tensor(b))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(as_tensor(a), as_tensor(b))


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)


def sqrt(x: Tensor) -> Tensor:
    return Sqrt.apply(x)


def abs(x: Tensor) -> Tensor:  # noqa: A001
    return Abs.apply(x)


def square(x: Tensor) -> Tensor:
    return Square.apply(x)


def clamp(x: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    return Clamp.apply(x, lo=lo, hi=hi)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def var(x: Tensor, axis: int = 0, ddof: int = 1, keepdims: bool = False) -> Tensor:
    return Var.apply(x, axis=axis, ddof=ddof, keepdims=keepdims)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor) -> Tensor:
    return Transpose.apply(x)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*xs, axis=axis)


def getitem(x: Tensor, idx: Any) -> Tensor:
    return GetItem.apply(x, idx=idx)


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    return Gather.apply(x, index=np.asarray(index, dtype=np.int64))


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    if b is None:
        return Conv1d.apply(x, w, stride=stride, padding=padding)
    return Conv1d.apply(x, w, b, stride=stride, padding=padding)


def scale_shift(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return ScaleShift.apply(x, scale, shift)
