"""
VeloNet: 1D Res2Net backbone with attention that regresses horizontal velocity.

Input windows are [B×6×N] (specific force fx,fy,fz then angular rate wx,wy,wz);
output is [B×2] velocity (vx, vy) in m/s.
"""

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, conv1d_output_length, relu, reshape
from src.nn.cbam import CBAM
from src.nn.layers import (
    BatchNorm1dLayer,
    Conv1dLayer,
    DropoutLayer,
    LinearLayer,
    MaxPool1dLayer,
    global_pool,
)
from src.nn.module import Module, ModuleList
from src.nn.res2net import Res2NetBlock

logger = logging.getLogger(__name__)

PLACEMENTS = ("p1", "p2", "p3", "p4")
PRECISIONS = {"float32": np.float32, "float64": np.float64}
EXPANSION = 4


@dataclass
class VeloNetConfig:
    """Architecture hyperparameters. Equal configs build identical networks."""

    window_n: int = 200
    in_channels: int = 6
    layer_blocks: list[int] = field(default_factory=lambda: [3, 4, 6, 3])
    base_width: int = 64
    cbam_placement: str = "p4"
    dropout_rate: float = 0.5
    rng_seed: int = 0
    reduction_ratio: int = 16
    precision: str = "float32"

    def __post_init__(self):
        self.layer_blocks = [int(b) for b in self.layer_blocks]
        if self.in_channels != 6:
            raise ContractViolation(f"in_channels must be 6 (3 accel + 3 gyro), got {self.in_channels}")
        if len(self.layer_blocks) != 4 or min(self.layer_blocks) < 1:
            raise ContractViolation(f"layer_blocks must be four positive counts, got {self.layer_blocks}")
        if self.base_width < 1 or self.base_width % 4:
            raise ContractViolation(f"base_width must be a positive multiple of 4, got {self.base_width}")
        if self.cbam_placement not in PLACEMENTS:
            raise ContractViolation(
                f"cbam_placement must be one of {PLACEMENTS}, got '{self.cbam_placement}'"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractViolation(f"dropout_rate must be in [0,1), got {self.dropout_rate}")
        if self.reduction_ratio < 1:
            raise ContractViolation(f"reduction_ratio must be positive, got {self.reduction_ratio}")
        if self.precision not in PRECISIONS:
            raise ContractViolation(f"precision must be one of {sorted(PRECISIONS)}, got '{self.precision}'")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(PRECISIONS[self.precision])

    @property
    def feature_channels(self) -> int:
        """Channels leaving Layer4 (input of the second CBAM and the head)."""
        return self.base_width * 2 ** 3 * EXPANSION

    def stage_lengths(self) -> "OrderedDict[str, int]":
        """Sequence length after each stage for an input of window_n samples."""
        lengths: OrderedDict[str, int] = OrderedDict()
        length = conv1d_output_length(self.window_n, 7, 2, 3, 1)
        lengths["stem"] = length
        length = (length + 2 - 3) // 2 + 1 if length >= 1 else length
        lengths["maxpool"] = length
        for i in range(4):
            if i > 0:
                length = conv1d_output_length(length, 3, 2, 1, 1)
            lengths[f"layer{i + 1}"] = length
        return lengths

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "VeloNetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ContractViolation(f"Unknown VeloNetConfig keys: {sorted(unknown)}")
        return cls(**dict(values))


class VeloNet(Module):
    """
    Stem (Conv1d -> BN -> ReLU -> MaxPool), Layer1..Layer4 of Res2Net blocks,
    one CBAM at the configured placement, a second CBAM after Layer4, global
    average pooling over length, dropout and a linear head to (vx, vy).
    """

    def __init__(self, config: VeloNetConfig):
        super().__init__()
        self.config = config
        dtype = config.dtype
        rng = np.random.default_rng(config.rng_seed)
        base = config.base_width

        self.stem_conv = Conv1dLayer(6, base, 7, stride=2, padding=3, bias=False, rng=rng, dtype=dtype)
        self.stem_bn = BatchNorm1dLayer(base, dtype=dtype)
        self.stem_pool = MaxPool1dLayer(3, stride=2, padding=1)

        # channels entering Layer k for k = 1..4
        stage_inputs = []
        self.layers = ModuleList()
        in_channels = base
        for i, n_blocks in enumerate(config.layer_blocks):
            stage_inputs.append(in_channels)
            mid = base * 2 ** i
            out = mid * EXPANSION
            blocks = ModuleList()
            for j in range(n_blocks):
                stride = 2 if (i > 0 and j == 0) else 1
                blocks.append(Res2NetBlock(in_channels, mid, out, stride=stride, rng=rng, dtype=dtype))
                in_channels = out
            self.layers.append(blocks)

        self.placement_index = PLACEMENTS.index(config.cbam_placement)
        self.cbam_a = CBAM(
            stage_inputs[self.placement_index], config.reduction_ratio, rng=rng, dtype=dtype
        )
        self.cbam_b = CBAM(in_channels, config.reduction_ratio, rng=rng, dtype=dtype)
        self.dropout = DropoutLayer(config.dropout_rate, seed=int(rng.integers(2**31)))
        self.head = LinearLayer(in_channels, 2, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        window_n = self.config.window_n
        if x.ndim != 3 or x.shape[1] != 6 or x.shape[2] != window_n:
            raise ContractViolation(f"VeloNet expects input [B×6×{window_n}], got {x.shape}")
        if x.dtype != self.config.dtype and not x.requires_grad:
            x = Tensor(x.data, dtype=self.config.dtype)

        h = self.stem_pool(relu(self.stem_bn(self.stem_conv(x))))
        for i, blocks in enumerate(self.layers):
            if i == self.placement_index:
                h = self.cbam_a(h)
            for block in blocks:
                h = block(h)
        h = self.cbam_b(h)
        pooled = reshape(global_pool(h, "avg", "length"), (h.shape[0], h.shape[1]))
        return self.head(self.dropout(pooled))


def build(config: VeloNetConfig) -> VeloNet:
    """
    Build a VeloNet after checking that every stage keeps a positive length.

    Raises:
        ContractViolation: window_n too short, naming the first stage that collapses.
    """
    for stage, length in config.stage_lengths().items():
        if length < 1:
            raise ContractViolation(
                f"window_n={config.window_n} too short: stage '{stage}' would have length {length}"
            )
    net = VeloNet(config)
    logger.info(
        f"Built VeloNet (blocks={config.layer_blocks}, base_width={config.base_width}, "
        f"placement={config.cbam_placement}, N={config.window_n}) with "
        f"{net.parameter_count():,} parameters"
    )
    return net


def forward(net: VeloNet, x: Tensor) -> Tensor:
    return net(x)
