"""Convolutional block attention: channel gate followed by a temporal gate."""

from typing import Optional

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, concat, mul, relu, reshape, sigmoid
from src.nn.layers import Conv1dLayer, LinearLayer, global_pool
from src.nn.module import Module


class ChannelAttention(Module):
    """Shared two-layer MLP over average- and max-pooled channel descriptors."""

    def __init__(
        self,
        channels: int,
        reduction_ratio: int = 16,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        if reduction_ratio < 1:
            raise ContractViolation(f"reduction ratio must be positive, got {reduction_ratio}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.hidden = max(1, channels // reduction_ratio)
        self.fc1 = LinearLayer(channels, self.hidden, rng=rng, dtype=dtype)
        self.fc2 = LinearLayer(self.hidden, channels, rng=rng, dtype=dtype)

    def _mlp(self, v: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(v)))

    def forward(self, x: Tensor) -> Tensor:
        """Return the channel mask Mc[B×C×1] for x[B×C×L]."""
        if x.ndim != 3 or x.shape[1] != self.channels:
            raise ContractViolation(f"channel attention expects {self.channels} channels, got {x.shape}")
        batch = x.shape[0]
        avg = reshape(global_pool(x, "avg", "length"), (batch, self.channels))
        mx = reshape(global_pool(x, "max", "length"), (batch, self.channels))
        logits = self._mlp(avg) + self._mlp(mx)
        return reshape(sigmoid(logits), (batch, self.channels, 1))


class SpatialAttention(Module):
    """Convolution over [mean, max] across channels, giving a per-time-step gate."""

    def __init__(
        self,
        kernel_size: int = 7,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ContractViolation(f"spatial attention kernel must be odd, got {kernel_size}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.conv = Conv1dLayer(2, 1, kernel_size, padding=kernel_size // 2, bias=False, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        """Return the temporal mask Ms[B×1×L] for x[B×C×L]."""
        if x.ndim != 3:
            raise ContractViolation(f"spatial attention expects a 3D input, got {x.shape}")
        pooled = concat([global_pool(x, "avg", "channel"), global_pool(x, "max", "channel")], axis=1)
        return sigmoid(self.conv(pooled))


def cbam_forward(cam: ChannelAttention, sam: SpatialAttention, x: Tensor) -> Tensor:
    """F' = Mc(F) ⊙ F, then F'' = Ms(F') ⊙ F'. Output shape equals input shape."""
    refined = mul(cam(x), x)
    return mul(sam(refined), refined)


class CBAM(Module):
    def __init__(
        self,
        channels: int,
        reduction_ratio: int = 16,
        spatial_kernel: int = 7,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.channel_attention = ChannelAttention(channels, reduction_ratio, rng=rng, dtype=dtype)
        self.spatial_attention = SpatialAttention(spatial_kernel, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return cbam_forward(self.channel_attention, self.spatial_attention, x)
