"""1D layers: convolution, batch normalisation, pooling, dropout and linear."""

import logging
from typing import Optional

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import (
    Tensor,
    batchnorm1d,
    conv1d,
    conv1d_output_length,
    matmul,
    maxpool1d,
    mul,
    reduce,
    transpose,
)
from src.nn.module import Module

logger = logging.getLogger(__name__)


def kaiming_normal(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype: np.dtype
) -> np.ndarray:
    """He initialisation: N(0, 2 / fan_in)."""
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def _default_rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(0)


class Conv1dLayer(Module):
    """1D convolution (cross-correlation) with zero padding."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        bias: bool = True,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        if min(in_channels, out_channels, kernel_size, stride, dilation) < 1 or padding < 0:
            raise ContractViolation(
                f"Invalid Conv1d geometry: in={in_channels} out={out_channels} k={kernel_size} "
                f"s={stride} p={padding} d={dilation}"
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        rng = _default_rng(rng)
        self.weight = Tensor(
            kaiming_normal(rng, (out_channels, in_channels, kernel_size), in_channels * kernel_size, dtype),
            requires_grad=True,
        )
        if bias:
            self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        else:
            self.bias = None

    def output_length(self, length: int) -> int:
        return conv1d_output_length(length, self.kernel_size, self.stride, self.padding, self.dilation)

    def forward(self, x: Tensor) -> Tensor:
        return conv1d(x, self.weight, self.bias, self.stride, self.padding, self.dilation)


class BatchNorm1dLayer(Module):
    """Per-channel batch normalisation with running statistics."""

    def __init__(
        self,
        num_features: int,
        momentum: float = 0.1,
        eps: float = 1e-5,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        if not 0.0 < momentum < 1.0:
            raise ContractViolation(f"BatchNorm momentum must be in (0,1), got {momentum}")
        if eps <= 0:
            raise ContractViolation(f"BatchNorm epsilon must be positive, got {eps}")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=dtype), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(num_features, dtype=dtype))
        self.register_buffer("running_var", np.ones(num_features, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return batchnorm1d(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class MaxPool1dLayer(Module):
    def __init__(self, kernel_size: int, stride: Optional[int] = None, padding: int = 0):
        super().__init__()
        self.kernel_size = kernel_size
        self.stride = stride or kernel_size
        self.padding = padding

    def output_length(self, length: int) -> int:
        return (length + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x: Tensor) -> Tensor:
        return maxpool1d(x, self.kernel_size, self.stride, self.padding)


_POOL_AXES = {"length": 2, "channel": 1}
_POOL_OPS = {"avg": "mean", "max": "max"}


def global_pool(x: Tensor, op: str = "avg", over: str = "length") -> Tensor:
    """Average or max over the length or channel axis of x[B×C×L], keeping a singleton axis."""
    if x.ndim != 3:
        raise ContractViolation(f"global_pool expects a 3D input, got {x.shape}")
    if op not in _POOL_OPS or over not in _POOL_AXES:
        raise ContractViolation(f"global_pool: unknown op '{op}' or axis '{over}'")
    return reduce(_POOL_OPS[op], x, axis=_POOL_AXES[over], keepdims=True)


class LinearLayer(Module):
    """Affine map x·Wᵀ + b on x[B×in]."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        bias: bool = True,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = _default_rng(rng)
        self.weight = Tensor(
            kaiming_normal(rng, (out_features, in_features), in_features, dtype), requires_grad=True
        )
        if bias:
            self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True)
        else:
            self.bias = None

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ContractViolation(
                f"Linear layer expects [B×{self.in_features}] input, got {x.shape}"
            )
        out = matmul(x, transpose(self.weight))
        if self.bias is not None:
            out = out + self.bias
        return out


class DropoutLayer(Module):
    """Inverted dropout; identity in eval mode."""

    def __init__(self, rate: float = 0.5, seed: int = 0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ContractViolation(f"Dropout rate must be in [0,1), got {rate}")
        self.rate = rate
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def forward(self, x: Tensor) -> Tensor:
        if not self.training or self.rate == 0.0:
            return x
        keep = self.rng.random(x.shape) >= self.rate
        mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return mul(x, Tensor(mask))
