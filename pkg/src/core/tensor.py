"""Dense tensors with tape-based reverse-mode automatic differentiation.

Operations record themselves on the active `Tape` (see `Tape.__enter__`) when at
least one input requires a gradient. Outside a tape every operation is plain
numpy evaluation, which is what inference uses.

Conventions:
- Convolution is cross-correlation (no kernel flip).
- Max reductions and max pooling route the gradient to the first maximal element.
- ReLU has zero subgradient at and below zero.
"""

import contextvars
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "active_tape", default=None
)


class Tensor:
    """N-dimensional real array that can take part in gradient recording."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
        name: Optional[str] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    # *** properties ***
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # *** data handling ***
    def item(self) -> float:
        if self.size != 1:
            raise ContractViolation(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    # *** operator sugar ***
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, _lift(other, self))

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(_lift(other, self), self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, _lift(other, self))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(_lift(other, self), self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, (int, float)) and not isinstance(other, bool):
            return scale(self, float(other))
        return mul(self, _lift(other, self))

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self.__mul__(other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce("sum", self, axis, keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce("mean", self, axis, keepdims)

    def max(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce("max", self, axis, keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _lift(value: ArrayLike, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def as_tensor(value: ArrayLike, dtype: Optional[np.dtype] = None) -> Tensor:
    """Wrap a value as a constant tensor (no copy when already a Tensor)."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


@dataclass
class TapeRecord:
    """One recorded primitive: its inputs, output and backward rule."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """
    Ordered record of primitive operations for one backward pass.

    Use as a context manager; the tape is active only for the current context
    (thread / task), so a tape is never shared between threads.

    Args:
        perturb: Optional mapping of primitive name to a factor applied to the
            input gradients that primitive produces during backward. A deliberate
            corruption, used as a negative control for gradient checks.
    """

    def __init__(self, perturb: Optional[dict[str, float]] = None):
        self.records: list[TapeRecord] = []
        self.perturb = dict(perturb or {})
        self._produced: set[int] = set()
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None
        return False

    def __len__(self) -> int:
        return len(self.records)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, rule: BackwardFn) -> None:
        self.records.append(TapeRecord(op, inputs, output, rule))
        self._produced.add(id(output))

    def produced(self, tensor: Tensor) -> bool:
        """True if `tensor` is the output of an operation recorded on this tape."""
        return id(tensor) in self._produced


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def _emit(op: str, inputs: tuple[Tensor, ...], out_data: np.ndarray, rule: BackwardFn) -> Tensor:
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(op, inputs, out, rule)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """
    Propagate d(loss)/d(.) to every tensor requiring a gradient.

    Gradients accumulate into `.grad` (zero them between steps). Each recorded
    operation is visited at most once, in reverse recording order.
    """
    if loss.ndim != 0:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.produced(loss):
        raise ContractViolation("loss was not produced by an operation on this tape")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        g = pending.pop(id(rec.output), None)
        if g is None:
            continue
        rec.output.grad = g if rec.output.grad is None else rec.output.grad + g
        input_grads = rec.backward(g)
        factor = tape.perturb.get(rec.op)
        for tensor, gi in zip(rec.inputs, input_grads):
            if gi is None or not tensor.requires_grad:
                continue
            if factor is not None:
                gi = gi * factor
            gi = np.asarray(gi, dtype=tensor.dtype)
            if gi.shape != tensor.shape:
                raise ContractViolation(
                    f"{rec.op} backward produced grad {gi.shape} for input {tensor.shape}"
                )
            key = id(tensor)
            if tape.produced(tensor):
                pending[key] = pending[key] + gi if key in pending else gi
            else:
                tensor.grad = gi.copy() if tensor.grad is None else tensor.grad + gi


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# *** broadcasting helpers ***

def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ContractViolation(f"{op}: shapes {a.shape} and {b.shape} are not broadcastable")


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over the axes that broadcasting expanded to reach it from `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# *** elementwise ***

def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    return _emit(
        "add",
        (a, b),
        a.data + b.data,
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    return _emit(
        "sub",
        (a, b),
        a.data - b.data,
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    return _emit(
        "mul",
        (a, b),
        a.data * b.data,
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _emit("neg", (a,), -a.data, lambda g: (-g,))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit("relu", (a,), np.where(mask, a.data, 0).astype(a.dtype), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1 - out),))


_ELEMENTWISE_BINARY = {"add": add, "sub": sub, "mul": mul}
_ELEMENTWISE_UNARY = {"relu": relu, "sigmoid": sigmoid, "neg": neg}


def elementwise(
    op: str, a: Tensor, b: Optional[Tensor] = None, factor: Optional[float] = None
) -> Tensor:
    """Dispatch an elementwise op by name: add, sub, mul, relu, sigmoid, neg, scale."""
    if op in _ELEMENTWISE_BINARY:
        if b is None:
            raise ContractViolation(f"{op} needs two operands")
        return _ELEMENTWISE_BINARY[op](a, b)
    if op in _ELEMENTWISE_UNARY:
        return _ELEMENTWISE_UNARY[op](a)
    if op == "scale":
        if factor is None:
            raise ContractViolation("scale needs a factor")
        return scale(a, factor)
    raise ContractViolation(f"Unknown elementwise op '{op}'")


# *** linear algebra ***

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ContractViolation(f"matmul needs 2D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return _emit("matmul", (a, b), a.data @ b.data, lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _emit(
        "transpose",
        (a,),
        np.ascontiguousarray(a.data.transpose(axes)),
        lambda g: (g.transpose(inverse),),
    )


# *** reductions ***

def _normalize_axis(axis: Optional[int], ndim: int, op: str) -> Optional[int]:
    if axis is None:
        return None
    if not -ndim <= axis < ndim:
        raise ContractViolation(f"{op}: axis {axis} invalid for rank {ndim}")
    return axis % ndim


def reduce(op: str, a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Reduce with sum, mean or max over `axis` (all elements when None)."""
    axis = _normalize_axis(axis, a.ndim, op)
    shape = a.shape

    def _expand(g: np.ndarray) -> np.ndarray:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    if op == "sum":
        return _emit("sum", (a,), a.data.sum(axis=axis, keepdims=keepdims), lambda g: (_expand(g),))

    if op == "mean":
        count = a.size if axis is None else shape[axis]
        if count == 0:
            raise ContractViolation("mean over an empty axis")
        return _emit(
            "mean",
            (a,),
            a.data.mean(axis=axis, keepdims=keepdims),
            lambda g: (_expand(g) / count,),
        )

    if op == "max":
        if a.size == 0 or (axis is not None and shape[axis] == 0):
            raise ContractViolation("max over an empty axis")
        out = a.data.max(axis=axis, keepdims=keepdims)

        def _max_backward(g: np.ndarray):
            grad = np.zeros_like(a.data)
            if axis is None:
                grad.reshape(-1)[int(np.argmax(a.data))] = g.reshape(-1)[0]
                return (grad,)
            first = np.expand_dims(np.argmax(a.data, axis=axis), axis)
            g_full = g if keepdims else np.expand_dims(g, axis)
            np.put_along_axis(grad, first, g_full, axis=axis)
            return (grad,)

        return _emit("max", (a,), out, _max_backward)

    raise ContractViolation(f"Unknown reduction '{op}'")


# *** shape manipulation ***

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ContractViolation(f"cannot reshape {a.shape} to {shape}")
    return _emit("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ContractViolation("concat needs at least one tensor")
    axis = _normalize_axis(axis, tensors[0].ndim, "concat")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ContractViolation(f"concat: {e}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _emit("concat", tensors, out, lambda g: tuple(np.split(g, bounds, axis=axis)))


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    axis = _normalize_axis(axis, a.ndim, "slice_axis")
    if not 0 <= start < stop <= a.shape[axis]:
        raise ContractViolation(f"slice [{start}:{stop}] out of range for axis size {a.shape[axis]}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def _slice_backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        grad[index] = g
        return (grad,)

    return _emit("slice", (a,), a.data[index].copy(), _slice_backward)


# *** fused layer primitives ***

def conv1d_output_length(length: int, kernel_size: int, stride: int, padding: int, dilation: int) -> int:
    return (length + 2 * padding - dilation * (kernel_size - 1) - 1) // stride + 1


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """1D cross-correlation of x[B×C_in×L] with weight[C_out×C_in×k], zero padded."""
    if x.ndim != 3 or weight.ndim != 3:
        raise ContractViolation(f"conv1d expects 3D input and weight, got {x.shape}, {weight.shape}")
    batch, channels, length = x.shape
    out_channels, in_channels, kernel = weight.shape
    if channels != in_channels:
        raise ContractViolation(f"conv1d channel mismatch: input has {channels}, weight expects {in_channels}")
    out_len = conv1d_output_length(length, kernel, stride, padding, dilation)
    if out_len < 1:
        raise ContractViolation(
            f"conv1d output length {out_len} < 1 (L={length}, k={kernel}, s={stride}, p={padding}, d={dilation})"
        )

    span = dilation * (kernel - 1) + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = sliding_window_view(xp, span, axis=2)[:, :, ::stride, ::dilation][:, :, :out_len]
    out = np.tensordot(cols, weight.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def _conv_backward(g: np.ndarray):
        d_weight = np.tensordot(g, cols, axes=([0, 2], [0, 2]))
        d_cols = np.tensordot(g, weight.data, axes=([1], [0]))
        d_xp = np.zeros(xp.shape, dtype=xp.dtype)
        stop_span = stride * (out_len - 1) + 1
        for j in range(kernel):
            start = j * dilation
            d_xp[:, :, start : start + stop_span : stride] += d_cols[:, :, :, j].transpose(0, 2, 1)
        d_x = d_xp[:, :, padding : padding + length]
        grads = [d_x, d_weight]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _emit("conv1d", inputs, out, _conv_backward)


def maxpool1d(x: Tensor, kernel_size: int, stride: Optional[int] = None, padding: int = 0) -> Tensor:
    """Windowed maximum over the last axis of x[B×C×L] (padding never wins)."""
    if x.ndim != 3:
        raise ContractViolation(f"maxpool1d expects a 3D input, got {x.shape}")
    stride = stride or kernel_size
    if padding > kernel_size // 2:
        raise ContractViolation(f"maxpool1d padding {padding} exceeds half the kernel {kernel_size}")
    batch, channels, length = x.shape
    out_len = (length + 2 * padding - kernel_size) // stride + 1
    if out_len < 1:
        raise ContractViolation(f"maxpool1d output length {out_len} < 1 (L={length}, k={kernel_size})")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)), constant_values=-np.inf) if padding else x.data
    windows = sliding_window_view(xp, kernel_size, axis=2)[:, :, ::stride][:, :, :out_len]
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    padded_len = xp.shape[2]

    def _pool_backward(g: np.ndarray):
        positions = np.arange(out_len)[None, None, :] * stride + arg
        rows = (np.arange(batch)[:, None, None] * channels + np.arange(channels)[None, :, None]) * padded_len
        flat = np.bincount(
            (rows + positions).reshape(-1),
            weights=g.reshape(-1),
            minlength=batch * channels * padded_len,
        ).reshape(batch, channels, padded_len)
        return (flat[:, :, padding : padding + length].astype(x.dtype),)

    return _emit("maxpool1d", (x,), np.ascontiguousarray(out), _pool_backward)


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Batch normalisation over (batch, length) per channel of x[B×C×L].

    In training mode batch statistics are used and the running statistics are
    updated in place (unbiased variance); otherwise the running statistics are used.
    """
    if x.ndim != 3:
        raise ContractViolation(f"batchnorm1d expects a 3D input, got {x.shape}")
    batch, channels, length = x.shape
    if channels != gamma.shape[0]:
        raise ContractViolation(f"batchnorm1d channel mismatch: {channels} vs {gamma.shape[0]}")
    g3 = gamma.data[None, :, None]

    if training:
        count = batch * length
        if count < 2:
            raise ContractViolation("batchnorm1d in train mode needs batch*length >= 2")
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * (count / (count - 1))
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x.data - mean[None, :, None]) * inv_std[None, :, None]

        def _bn_backward(g: np.ndarray):
            d_hat = g * g3
            d_x = (inv_std[None, :, None] / count) * (
                count * d_hat
                - d_hat.sum(axis=(0, 2), keepdims=True)
                - x_hat * (d_hat * x_hat).sum(axis=(0, 2), keepdims=True)
            )
            return d_x, (g * x_hat).sum(axis=(0, 2)), g.sum(axis=(0, 2))

    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.data - running_mean[None, :, None]) * inv_std[None, :, None]

        def _bn_backward(g: np.ndarray):
            return g * g3 * inv_std[None, :, None], (g * x_hat).sum(axis=(0, 2)), g.sum(axis=(0, 2))

    out = (g3 * x_hat + beta.data[None, :, None]).astype(x.dtype, copy=False)
    return _emit("batchnorm1d", (x, gamma, beta), out, _bn_backward)
