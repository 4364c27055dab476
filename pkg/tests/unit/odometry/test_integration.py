"""Unit tests for velocity integration and network reconstruction."""

import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.dataio.synthetic import SyntheticConfig, synthesize, synthesize_with_truth
from src.nn.velonet import build
from src.odometry.integration import integrate_velocity, predict_velocity_series, reconstruct_from_network
from src.odometry.trajectory import VelocitySeries


def constant_velocity_net(config, vx: float, vy: float):
    """A network whose output ignores its input: zero head weights, bias (vx, vy)."""
    net = build(config)
    net.head.weight.data[...] = 0.0
    net.head.bias.data[...] = np.array([vx, vy], dtype=net.head.bias.data.dtype)
    return net


class TestIntegrateVelocity:
    """integrate_velocity behaviour."""

    def test_unit_speed_for_one_second(self):
        """Test 200 samples of vx=1 at 5 ms land at (1, 0)."""
        t = np.arange(1, 201) * 0.005
        series = VelocitySeries(t, np.ones(200), np.zeros(200), start_time=0.0)
        trajectory = integrate_velocity(series)
        assert len(trajectory) == 201
        assert trajectory.endpoint == pytest.approx((1.0, 0.0), abs=1e-12)
        assert trajectory.timestamps[0] == 0.0

    def test_zero_velocity_stays_at_origin(self):
        """Test a stationary series keeps every point at the origin."""
        t = np.linspace(0.1, 2.0, 20)
        trajectory = integrate_velocity(VelocitySeries(t, np.zeros(20), np.zeros(20)), origin=(3.0, -2.0))
        np.testing.assert_array_equal(trajectory.px, 3.0)
        np.testing.assert_array_equal(trajectory.py, -2.0)

    def test_circle_closes(self):
        """Test one lap of a unit-speed circle returns to the start."""
        t = np.linspace(0.0, 2 * np.pi, 1257)
        stamps = t[1:]
        series = VelocitySeries(stamps, -np.sin(stamps), np.cos(stamps), start_time=t[0])
        trajectory = integrate_velocity(series, origin=(1.0, 0.0))
        assert trajectory.endpoint == pytest.approx((1.0, 0.0), abs=1e-3)

    def test_linear_in_velocity(self, rng):
        """Test integrating a·v1 + b·v2 equals the same combination of the two integrals."""
        t = np.cumsum(rng.uniform(0.004, 0.006, 50))
        v1 = rng.standard_normal((50, 2))
        v2 = rng.standard_normal((50, 2))
        a, b = 2.5, -0.75

        def integral(v):
            return integrate_velocity(VelocitySeries(t, v[:, 0], v[:, 1], start_time=0.0)).positions

        np.testing.assert_allclose(integral(a * v1 + b * v2), a * integral(v1) + b * integral(v2), atol=1e-12)

    def test_origin_translates(self):
        """Test changing the origin shifts every point by the same offset."""
        t = np.arange(1, 11) * 0.1
        series = VelocitySeries(t, np.linspace(0, 1, 10), np.linspace(1, 0, 10))
        base = integrate_velocity(series)
        shifted = integrate_velocity(series, origin=(5.0, 7.0))
        np.testing.assert_allclose(shifted.positions - base.positions, np.tile([5.0, 7.0], (11, 1)))

    def test_matches_synthetic_ground_truth(self):
        """Test integrating the exact synthetic velocity reproduces the path closely."""
        record, truth = synthesize_with_truth(
            SyntheticConfig(path_type="circle", speed=1.2, duration=8.0, sample_rate=200.0, radius=3.0)
        )
        trajectory = integrate_velocity(
            VelocitySeries(record.t[1:], truth.vx[1:], truth.vy[1:], start_time=record.t[0]),
            origin=tuple(record.gt_pos[0]),
        )
        np.testing.assert_allclose(trajectory.positions, record.gt_pos, atol=0.02)

    def test_single_sample_needs_start(self):
        """Test a lone sample without start time is rejected."""
        with pytest.raises(ContractViolation, match="start_time"):
            integrate_velocity(VelocitySeries([1.0], [1.0], [0.0]))

    def test_single_sample_with_start(self):
        """Test a lone sample with a start time integrates over one interval."""
        trajectory = integrate_velocity(VelocitySeries([0.5], [2.0], [0.0], start_time=0.0))
        assert trajectory.endpoint == pytest.approx((1.0, 0.0))

    def test_bad_origin(self):
        """Test origins that are not 2-vectors are rejected."""
        with pytest.raises(ContractViolation):
            integrate_velocity(VelocitySeries([1.0, 2.0], [0.0, 0.0], [0.0, 0.0]), origin=(0.0, 0.0, 0.0))


class TestReconstructFromNetwork:
    """Network-driven reconstruction."""

    @pytest.fixture
    def sequence(self, line_config):
        return synthesize(line_config)

    def test_non_overlapping_windows(self, tiny_config, sequence):
        """Test stride N gives one point per window and integrates the constant output."""
        net = constant_velocity_net(tiny_config, 1.0, 0.5)
        trajectory = reconstruct_from_network(net, sequence)

        windows = (len(sequence) - tiny_config.window_n) // tiny_config.window_n + 1
        assert len(trajectory) == windows + 1
        np.testing.assert_allclose(trajectory.timestamps, sequence.t[: windows * 64 + 1 : 64])
        start = sequence.gt_pos[0]
        covered = windows * 64 * 0.01
        assert trajectory.endpoint == pytest.approx((start[0] + covered, start[1] + 0.5 * covered), abs=1e-6)

    def test_overlapping_windows_average(self, tiny_config, sequence):
        """Test a smaller stride yields one velocity per covered sample interval."""
        net = constant_velocity_net(tiny_config, 1.0, 0.5)
        series = predict_velocity_series(net, sequence, stride=32)

        last_start = (len(sequence) - 64) // 32 * 32
        assert len(series) == last_start + 64
        np.testing.assert_allclose(series.vx, 1.0, atol=1e-9)
        np.testing.assert_allclose(series.vy, 0.5, atol=1e-9)

        trajectory = reconstruct_from_network(net, sequence, stride=32, origin=(0.0, 0.0))
        covered = (last_start + 64) * 0.01
        assert trajectory.endpoint == pytest.approx((covered, 0.5 * covered), abs=1e-6)

    def test_explicit_origin(self, tiny_config, sequence):
        """Test an explicit origin overrides the ground-truth start."""
        net = constant_velocity_net(tiny_config, 0.0, 0.0)
        trajectory = reconstruct_from_network(net, sequence, origin=(4.0, 2.0))
        np.testing.assert_allclose(trajectory.positions, np.tile([4.0, 2.0], (len(trajectory), 1)))

    def test_stride_larger_than_window(self, tiny_config, sequence):
        """Test strides that would skip samples are rejected."""
        net = build(tiny_config)
        with pytest.raises(ContractViolation, match="stride"):
            reconstruct_from_network(net, sequence, stride=tiny_config.window_n + 1)

    def test_short_sequence(self, tiny_config):
        """Test a sequence shorter than one window is rejected."""
        record = synthesize(SyntheticConfig(duration=0.3, sample_rate=100.0))
        with pytest.raises(ContractViolation, match="shorter"):
            reconstruct_from_network(build(tiny_config), record)
