"""Pytest configuration and fixtures.

Loaded automatically before any test module. Points config resolution at the
repo-local config/config.test.yaml so tests never read a user-level config.
"""

import os
from pathlib import Path

import numpy as np
import pytest

repo_root = Path(__file__).parent.parent

os.environ["VELONET_CONFIG_PATH"] = str(repo_root / "config")
os.environ["VELONET_CONFIG_FILE"] = "config.test.yaml"
os.environ.pop("VELONET_LOG_LEVEL", None)

from src.dataio.synthetic import SyntheticConfig  # noqa: E402
from src.nn.velonet import VeloNetConfig  # noqa: E402


@pytest.fixture
def rng(request):
    """Seeded generator; every test gets the same stream unless a seed is passed indirectly."""
    return np.random.default_rng(getattr(request, "param", 1234))


@pytest.fixture
def tiny_config():
    """Smallest useful VeloNet: one block per layer, base width 8, N=64, float64."""
    return VeloNetConfig(
        window_n=64,
        layer_blocks=[1, 1, 1, 1],
        base_width=8,
        dropout_rate=0.0,
        precision="float64",
        rng_seed=0,
    )


@pytest.fixture
def line_config():
    """Noise-free 10 s straight walk at 1 m/s, 100 Hz."""
    return SyntheticConfig(path_type="line", speed=1.0, duration=10.0, sample_rate=100.0, rng_seed=0)

