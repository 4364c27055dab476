"""Unit tests for the fit loop, reports and augmentation."""

import math

import numpy as np
import pytest

from src.core.errors import ContractViolation, NonFiniteLossError
from src.core.tensor import Tensor
from src.dataio.windows import WindowedDataset
from src.nn.velonet import VeloNetConfig, build
from src.training.augment import random_yaw
from src.training.trainer import (
    TrainConfig,
    TrainReport,
    batch_count,
    epoch_batches,
    evaluate_loss,
    fit,
    min_batch_windows,
    predict,
)


def random_dataset(rng, count: int, window_n: int, sequence_id: str) -> WindowedDataset:
    return WindowedDataset(
        inputs=rng.standard_normal((count, 6, window_n)),
        targets=rng.standard_normal((count, 2)),
        source_ids=[sequence_id] * count,
        start_indices=np.arange(count),
        window_n=window_n,
        stride=1,
    )


@pytest.fixture
def small_net_config():
    return VeloNetConfig(window_n=32, layer_blocks=[1, 1, 1, 1], base_width=8, dropout_rate=0.0, rng_seed=3)


@pytest.fixture
def datasets():
    rng = np.random.default_rng(5)
    return random_dataset(rng, 20, 32, "train-seq"), random_dataset(rng, 6, 32, "val-seq")


class TestTrainConfig:
    """Training configuration."""

    def test_defaults(self):
        """Test the default protocol values."""
        config = TrainConfig()
        assert (config.learning_rate, config.batch_size, config.plateau_patience, config.plateau_factor) == (
            0.001,
            128,
            10,
            0.1,
        )

    @pytest.mark.parametrize("kwargs", [{"batch_size": 0}, {"max_epochs": 0}, {"validation_metric": "ate"}])
    def test_invalid(self, kwargs):
        """Test invalid settings are rejected."""
        with pytest.raises(ContractViolation):
            TrainConfig(**kwargs)


class TestFit:
    """fit behaviour."""

    def test_report_populated(self, small_net_config, datasets):
        """Test one record per epoch and best weights restored."""
        train, val = datasets
        net = build(small_net_config)
        seen = []
        report = fit(net, train, val, TrainConfig(max_epochs=3, batch_size=8), on_epoch=seen.append)
        assert [r.epoch for r in report.epochs] == [1, 2, 3]
        assert seen == report.epochs
        assert 1 <= report.best_epoch <= 3
        assert net.training is False
        assert evaluate_loss(net, val) == pytest.approx(report.best_val_loss, rel=1e-5)

    def test_identical_seeds_identical_reports(self, small_net_config, datasets):
        """Test two runs with equal seeds produce the same losses and weights."""
        train, val = datasets
        runs = []
        for _ in range(2):
            net = build(small_net_config)
            report = fit(net, train, val, TrainConfig(max_epochs=2, batch_size=8, rng_seed=11))
            runs.append((report, net.state_dict()))
        (first, state_a), (second, state_b) = runs
        assert first.train_losses == second.train_losses
        assert first.val_losses == second.val_losses
        for name in state_a:
            np.testing.assert_array_equal(state_a[name], state_b[name])

    def test_learning_rate_trace_obeys_scheduler(self, small_net_config, datasets):
        """Test lr is non-increasing and every decrease is by exactly the factor."""
        train, val = datasets
        config = TrainConfig(max_epochs=6, batch_size=10, plateau_patience=1, plateau_factor=0.5, learning_rate=0.01)
        report = fit(build(small_net_config), train, val, config)
        rates = report.learning_rates
        for before, after in zip(rates, rates[1:]):
            assert after == before or math.isclose(after, before * 0.5)

    def test_shared_sequences_rejected(self, small_net_config, datasets):
        """Test validation windows from a training sequence are refused."""
        train, _ = datasets
        with pytest.raises(ContractViolation, match="shares"):
            fit(build(small_net_config), train, train, TrainConfig(max_epochs=1))

    def test_window_length_mismatch(self, small_net_config, rng):
        """Test datasets with a different N are refused."""
        train = random_dataset(rng, 4, 64, "a")
        val = random_dataset(rng, 4, 64, "b")
        with pytest.raises(ContractViolation):
            fit(build(small_net_config), train, val, TrainConfig(max_epochs=1))

    def test_non_finite_loss_reports_epoch_and_batch(self, small_net_config, datasets, monkeypatch):
        """Test a NaN training loss aborts with epoch and batch."""
        train, val = datasets
        monkeypatch.setattr(
            "src.training.trainer.mse_loss", lambda pred, target: Tensor(np.array(np.nan))
        )
        with pytest.raises(NonFiniteLossError) as excinfo:
            fit(build(small_net_config), train, val, TrainConfig(max_epochs=1))
        assert (excinfo.value.epoch, excinfo.value.batch) == (1, 0)

    def test_each_epoch_visits_every_window_once(self, small_net_config, datasets, monkeypatch):
        """Test the batches of every epoch partition the training windows."""
        train, val = datasets
        planned = []

        def recording(*args):
            batches = epoch_batches(*args)
            planned.append(batches)
            return batches

        monkeypatch.setattr("src.training.trainer.epoch_batches", recording)
        fit(build(small_net_config), train, val, TrainConfig(max_epochs=2, batch_size=8))
        assert len(planned) == 2
        for batches in planned:
            visited = np.concatenate(batches)
            assert sorted(visited.tolist()) == list(range(len(train)))

    def test_trailing_single_window_is_merged(self, small_net_config, rng):
        """Test 3 windows with batch_size 2 train at N=32, where Layer 4 has length 1."""
        train = random_dataset(rng, 3, 32, "a")
        val = random_dataset(rng, 2, 32, "b")
        report = fit(build(small_net_config), train, val, TrainConfig(max_epochs=1, batch_size=2))
        assert len(report.epochs) == 1

    def test_batch_too_small_for_window(self, small_net_config, datasets):
        """Test batch_size 1 at N=32 is refused up front, naming both settings."""
        train, val = datasets
        with pytest.raises(ContractViolation, match=r"batch_size=1 with window_n=32"):
            fit(build(small_net_config), train, val, TrainConfig(max_epochs=1, batch_size=1))

    def test_predict_restores_mode(self, small_net_config, datasets):
        """Test predict runs in eval mode and restores the caller's mode."""
        train, _ = datasets
        net = build(small_net_config).train()
        out = predict(net, train.inputs, batch_size=7)
        assert out.shape == (20, 2)
        assert net.training is True


class TestEpochBatches:
    """Batch planning."""

    @pytest.mark.parametrize("count,batch_size", [(20, 8), (129, 128), (17, 16), (5, 5)])
    def test_partition(self, count, batch_size):
        """Test one epoch's batches cover range(count) exactly once."""
        batches = epoch_batches(count, batch_size, 2, np.random.default_rng(0))
        visited = np.concatenate(batches)
        assert len(visited) == count
        assert set(visited.tolist()) == set(range(count))
        assert all(len(b) >= 2 for b in batches)

    def test_no_single_window_batch(self):
        """Test 3 windows at batch_size 2 form one batch instead of 2 + 1."""
        assert [len(b) for b in epoch_batches(3, 2, 2, np.random.default_rng(0))] == [3]

    def test_full_batches_when_unconstrained(self):
        """Test batch_size bounds every batch when BatchNorm allows single windows."""
        assert [len(b) for b in epoch_batches(10, 4, 1, np.random.default_rng(0))] == [4, 3, 3]

    def test_batch_count(self):
        """Test ceil(count / batch_size) unless min_batch caps it."""
        assert batch_count(129, 128, 1) == 2
        assert batch_count(17, 16, 2) == 2
        assert batch_count(3, 2, 2) == 1
        assert batch_count(1, 4, 1) == 1

    @pytest.mark.parametrize("window_n,expected", [(32, 2), (64, 1), (200, 1)])
    def test_min_batch_windows(self, window_n, expected):
        """Test two windows are needed once Layer 4 collapses to length 1."""
        config = VeloNetConfig(window_n=window_n, layer_blocks=[1, 1, 1, 1], base_width=8)
        assert min_batch_windows(config) == expected


class TestTrainReport:
    """Report CSV."""

    def test_csv_round_trip(self, small_net_config, datasets, tmp_path):
        """Test to_csv/from_csv keep epochs, losses and learning rates."""
        train, val = datasets
        report = fit(build(small_net_config), train, val, TrainConfig(max_epochs=2, batch_size=10))
        loaded = TrainReport.from_csv(report.to_csv(tmp_path / "report.csv"))
        assert loaded.train_losses == report.train_losses
        assert loaded.val_losses == report.val_losses
        assert loaded.learning_rates == report.learning_rates
        assert loaded.best_epoch == report.best_epoch

    def test_header(self, tmp_path):
        """Test the CSV header."""
        path = TrainReport().to_csv(tmp_path / "empty.csv")
        assert path.read_text().splitlines()[0] == "epoch,train_loss,val_loss,lr"


class TestRandomYaw:
    """Yaw augmentation."""

    def test_preserves_norms_and_vertical(self, rng):
        """Test horizontal norms and vertical channels are preserved."""
        inputs = rng.standard_normal((5, 6, 8))
        targets = rng.standard_normal((5, 2))
        rotated, new_targets = random_yaw(inputs, targets, rng)
        np.testing.assert_allclose(np.hypot(rotated[:, 0], rotated[:, 1]), np.hypot(inputs[:, 0], inputs[:, 1]))
        np.testing.assert_array_equal(rotated[:, 2], inputs[:, 2])
        np.testing.assert_array_equal(rotated[:, 5], inputs[:, 5])
        np.testing.assert_allclose(np.linalg.norm(new_targets, axis=1), np.linalg.norm(targets, axis=1))

    def test_inputs_and_targets_rotate_together(self, rng):
        """Test the same angle is applied to force and velocity."""
        inputs = np.zeros((3, 6, 4))
        inputs[:, 0, :] = 1.0
        targets = np.tile([1.0, 0.0], (3, 1))
        rotated, new_targets = random_yaw(inputs, targets, rng)
        np.testing.assert_allclose(rotated[:, 0, 0], new_targets[:, 0])
        np.testing.assert_allclose(rotated[:, 1, 0], new_targets[:, 1])
