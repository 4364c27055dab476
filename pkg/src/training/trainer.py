"""Mini-batch training loop with Adam, plateau scheduling and best-weight retention."""

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np
import pandas as pd

from src.core.errors import ContractViolation, NonFiniteLossError
from src.core.tensor import Tape, Tensor, backward
from src.dataio.windows import WindowedDataset
from src.nn.velonet import VeloNet, VeloNetConfig
from src.training.augment import random_yaw
from src.training.losses import mse_loss
from src.training.optim import AdamState, PlateauScheduler, adam_step

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["epoch", "train_loss", "val_loss", "lr"]


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 128
    max_epochs: int = 200
    plateau_patience: int = 10
    plateau_factor: float = 0.1
    plateau_threshold: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    rng_seed: int = 0
    validation_metric: str = "val_loss"
    augment_yaw: bool = True
    eval_batch_size: int = 512

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ContractViolation(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ContractViolation("batch sizes must be positive")
        if self.max_epochs < 1:
            raise ContractViolation(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.plateau_patience < 1:
            raise ContractViolation(f"plateau_patience must be >= 1, got {self.plateau_patience}")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ContractViolation(f"plateau_factor must be in (0,1), got {self.plateau_factor}")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0 and self.adam_epsilon > 0):
            raise ContractViolation("Adam betas must be in [0,1) and epsilon positive")
        if self.validation_metric != "val_loss":
            raise ContractViolation(f"validation_metric must be 'val_loss', got '{self.validation_metric}'")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "TrainConfig":
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractViolation(f"Unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**dict(values))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float = 0.0


@dataclass
class TrainReport:
    """Per-epoch history. `lr` is the rate used during that epoch."""

    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def train_losses(self) -> list[float]:
        return [r.train_loss for r in self.epochs]

    @property
    def val_losses(self) -> list[float]:
        return [r.val_loss for r in self.epochs]

    @property
    def learning_rates(self) -> list[float]:
        return [r.lr for r in self.epochs]

    @property
    def best_val_loss(self) -> float:
        return min(self.val_losses) if self.epochs else math.inf

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write `epoch,train_loss,val_loss,lr` (wall-clock is left out so reruns compare equal)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame([{c: getattr(r, c) for c in REPORT_COLUMNS} for r in self.epochs], columns=REPORT_COLUMNS)
        frame.to_csv(path, index=False)
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "TrainReport":
        frame = pd.read_csv(path, float_precision="round_trip")
        missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
        if missing:
            raise ContractViolation(f"{path}: training report lacks columns {missing}")
        records = [
            EpochRecord(int(row.epoch), float(row.train_loss), float(row.val_loss), float(row.lr))
            for row in frame.itertuples(index=False)
        ]
        best = min(records, key=lambda r: r.val_loss).epoch if records else 0
        return cls(records, best)


def predict(net: VeloNet, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Eval-mode velocities [M×2] for inputs [M×6×N]; the caller's train/eval mode is restored."""
    was_training = net.training
    net.eval()
    dtype = net.config.dtype
    try:
        outputs = [
            net(Tensor(inputs[i : i + batch_size], dtype=dtype)).data
            for i in range(0, len(inputs), batch_size)
        ]
    finally:
        net.train(was_training)
    if not outputs:
        return np.zeros((0, 2), dtype=dtype)
    return np.concatenate(outputs)


def evaluate_loss(net: VeloNet, dataset: WindowedDataset, batch_size: int = 512) -> float:
    """Eval-mode MSE over a whole dataset (equal weight per window)."""
    pred = predict(net, dataset.inputs, batch_size).astype(np.float64)
    return float(np.mean(np.sum((pred - dataset.targets) ** 2, axis=1)))


def min_batch_windows(config: VeloNetConfig) -> int:
    """Smallest batch for which every train-mode BatchNorm sees at least two values per channel."""
    shortest = min(config.stage_lengths().values())
    return math.ceil(2 / shortest)


def batch_count(count: int, batch_size: int, min_batch: int) -> int:
    return max(1, min(math.ceil(count / batch_size), count // min_batch))


def epoch_batches(count: int, batch_size: int, min_batch: int, rng: np.random.Generator) -> list[np.ndarray]:
    """
    One epoch's shuffled window indices split into near-equal batches.

    Batches hold at most `batch_size` windows unless that would leave one with
    fewer than `min_batch`; then fewer, larger batches are used.
    """
    return np.array_split(rng.permutation(count), batch_count(count, batch_size, min_batch))


def fit(
    net: VeloNet,
    train: WindowedDataset,
    val: WindowedDataset,
    config: TrainConfig,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainReport:
    """
    Train `net` in place and leave it holding the lowest-validation-loss weights.

    Each epoch visits every training window once in a seeded random order.
    Training runs BN/dropout in train mode; validation runs in eval mode.

    Raises:
        ContractViolation: empty datasets, window length mismatch, or validation
            windows drawn from a training sequence, or batches too small for
            train-mode BatchNorm at this window length.
        NonFiniteLossError: training or validation loss became NaN/Inf.
    """
    if len(train) == 0 or len(val) == 0:
        raise ContractViolation("training and validation datasets must be non-empty")
    for name, dataset in (("train", train), ("val", val)):
        if dataset.window_n != net.config.window_n:
            raise ContractViolation(
                f"{name} windows have N={dataset.window_n}, network expects {net.config.window_n}"
            )
    shared = train.sequence_ids & val.sequence_ids
    if shared:
        raise ContractViolation(f"validation shares sequences with training: {sorted(shared)}")
    min_batch = min_batch_windows(net.config)
    if config.batch_size < min_batch or len(train) < min_batch:
        raise ContractViolation(
            f"batch_size={config.batch_size} with window_n={net.config.window_n} leaves train-mode BatchNorm a "
            f"single value per channel; batches need at least {min_batch} windows (training set has {len(train)})"
        )

    rng = np.random.default_rng(config.rng_seed)
    params = list(net.named_parameters())
    state = AdamState()
    scheduler = PlateauScheduler(
        config.learning_rate, config.plateau_patience, config.plateau_factor, config.plateau_threshold
    )
    dtype = net.config.dtype
    n_batches = batch_count(len(train), config.batch_size, min_batch)
    report = TrainReport()
    best_val = math.inf
    best_state = net.state_dict()

    logger.info(
        f"Training on {len(train)} windows ({n_batches} batches/epoch), validating on {len(val)}, "
        f"up to {config.max_epochs} epochs at lr={config.learning_rate}"
    )
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        lr = scheduler.lr
        net.train()
        total = 0.0
        for batch_index, idx in enumerate(epoch_batches(len(train), config.batch_size, min_batch, rng)):
            x, y = train.inputs[idx], train.targets[idx]
            if config.augment_yaw:
                x, y = random_yaw(x, y, rng)
            net.zero_grad()
            with Tape() as tape:
                loss = mse_loss(net(Tensor(x, dtype=dtype)), Tensor(y, dtype=dtype))
                value = loss.item()
                if not math.isfinite(value):
                    logger.error(f"Non-finite training loss at epoch {epoch}, batch {batch_index}")
                    raise NonFiniteLossError(epoch, batch_index, value)
                backward(loss, tape)
            adam_step(state, params, lr, config)
            total += value * len(idx)
            logger.debug(f"epoch {epoch} batch {batch_index}: loss {value:.6g}")

        train_loss = total / len(train)
        val_loss = evaluate_loss(net, val, config.eval_batch_size)
        if not math.isfinite(val_loss):
            logger.error(f"Non-finite validation loss at epoch {epoch}")
            raise NonFiniteLossError(epoch, -1, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_state = net.state_dict()
            report.best_epoch = epoch

        record = EpochRecord(epoch, train_loss, val_loss, lr, time.perf_counter() - started)
        report.epochs.append(record)
        scheduler.step(val_loss)
        logger.info(
            f"epoch {epoch}/{config.max_epochs}: train {train_loss:.6g} val {val_loss:.6g} "
            f"lr {lr:.3g} ({record.seconds:.2f}s)"
        )
        if on_epoch is not None:
            on_epoch(record)

    net.load_state_dict(best_state)
    net.eval()
    logger.info(f"Best validation loss {best_val:.6g} at epoch {report.best_epoch}")
    return report
