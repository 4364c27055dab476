"""Res2Net bottleneck block with hierarchical residual-like segment connections."""

import logging
from typing import Optional

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, concat, relu, slice_axis
from src.nn.layers import BatchNorm1dLayer, Conv1dLayer
from src.nn.module import Module, ModuleList

logger = logging.getLogger(__name__)


class Res2NetBlock(Module):
    """
    1×1 reduce, four hierarchical 3-tap segment convolutions, 1×1 fuse, residual.

    The reduced map is split channel-wise into X1..X4. Segment i sees Xi plus
    the output of segment i-1 (except the first), so receptive fields grow
    from one segment to the next. When the block downsamples (stride > 1) the
    strided segment outputs no longer align with the unstrided splits and the
    cross-segment addition is skipped.
    """

    def __init__(
        self,
        in_channels: int,
        mid_channels: int,
        out_channels: int,
        stride: int = 1,
        scale: int = 4,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ):
        super().__init__()
        if scale < 1 or mid_channels % scale:
            raise ContractViolation(
                f"Res2Net mid channels {mid_channels} must be divisible by scale {scale}"
            )
        if stride < 1:
            raise ContractViolation(f"Res2Net stride must be >= 1, got {stride}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        self.mid_channels = mid_channels
        self.out_channels = out_channels
        self.stride = stride
        self.scale = scale
        self.width = mid_channels // scale

        self.reduce_conv = Conv1dLayer(in_channels, mid_channels, 1, bias=False, rng=rng, dtype=dtype)
        self.reduce_bn = BatchNorm1dLayer(mid_channels, dtype=dtype)
        self.segment_convs = ModuleList(
            Conv1dLayer(self.width, self.width, 3, stride=stride, padding=1, bias=False, rng=rng, dtype=dtype)
            for _ in range(scale)
        )
        self.segment_bns = ModuleList(BatchNorm1dLayer(self.width, dtype=dtype) for _ in range(scale))
        self.fuse_conv = Conv1dLayer(mid_channels, out_channels, 1, bias=False, rng=rng, dtype=dtype)
        self.fuse_bn = BatchNorm1dLayer(out_channels, dtype=dtype)

        if stride != 1 or in_channels != out_channels:
            self.shortcut_conv = Conv1dLayer(
                in_channels, out_channels, 1, stride=stride, bias=False, rng=rng, dtype=dtype
            )
            self.shortcut_bn = BatchNorm1dLayer(out_channels, dtype=dtype)
        else:
            self.shortcut_conv = None
            self.shortcut_bn = None

    @property
    def has_projection(self) -> bool:
        return self.shortcut_conv is not None

    def hierarchical_outputs(self, u: Tensor, linearized: bool = False) -> list[Tensor]:
        """
        Segment outputs Y1..Y4 for the reduced map u[B×mid×L].

        With `linearized` the per-segment BatchNorm and ReLU are skipped, leaving
        only the convolution chain (used to inspect receptive fields).
        """
        if u.ndim != 3 or u.shape[1] != self.mid_channels:
            raise ContractViolation(
                f"expected reduced map with {self.mid_channels} channels, got {u.shape}"
            )
        splits = [slice_axis(u, 1, i * self.width, (i + 1) * self.width) for i in range(self.scale)]
        outputs: list[Tensor] = []
        previous: Optional[Tensor] = None
        for split, conv, bn in zip(splits, self.segment_convs, self.segment_bns):
            segment_in = split if previous is None or self.stride != 1 else split + previous
            y = conv(segment_in)
            if not linearized:
                y = relu(bn(y))
            outputs.append(y)
            previous = y
        return outputs

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ContractViolation(
                f"Res2Net block expects [B×{self.in_channels}×L] input, got {x.shape}"
            )
        u = relu(self.reduce_bn(self.reduce_conv(x)))
        fused = self.fuse_bn(self.fuse_conv(concat(self.hierarchical_outputs(u), axis=1)))
        shortcut = self.shortcut_bn(self.shortcut_conv(x)) if self.has_projection else x
        if fused.shape != shortcut.shape:
            raise ContractViolation(
                f"residual shape mismatch: branch {fused.shape} vs shortcut {shortcut.shape}"
            )
        return relu(fused + shortcut)
