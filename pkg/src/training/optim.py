"""Adam updates and the reduce-on-plateau learning-rate schedule."""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from src.core.errors import ContractViolation, NonFiniteGradientError
from src.core.tensor import Tensor

logger = logging.getLogger(__name__)


class AdamSettings(Protocol):
    adam_beta1: float
    adam_beta2: float
    adam_epsilon: float


@dataclass
class AdamState:
    """First/second moment estimates per parameter name and the step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    state: AdamState,
    params: Iterable[tuple[str, Tensor]],
    lr: float,
    config: AdamSettings,
) -> None:
    """
    Apply one bias-corrected Adam update in place.

    Missing gradients count as zero. All gradients are validated before any
    parameter changes.

    Raises:
        NonFiniteGradientError: naming the first parameter with a NaN/Inf gradient.
        ContractViolation: a gradient's shape differs from its parameter's.
    """
    named = list(params)
    grads = {}
    for name, p in named:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ContractViolation(f"gradient for '{name}' has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            logger.error(f"Non-finite gradient in '{name}'")
            raise NonFiniteGradientError(name)
        grads[name] = g

    state.t += 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_epsilon
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for name, p in named:
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        p.data -= update.astype(p.dtype, copy=False)


class PlateauScheduler:
    """
    Multiply the learning rate by `factor` after `patience` epochs without improvement.

    An epoch improves when its validation loss is below best − threshold; the
    stagnation counter resets on improvement and after every reduction.
    """

    def __init__(self, lr: float, patience: int = 10, factor: float = 0.1, threshold: float = 0.0):
        if patience < 1:
            raise ContractViolation(f"patience must be >= 1, got {patience}")
        if not 0.0 < factor < 1.0:
            raise ContractViolation(f"factor must be in (0,1), got {factor}")
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.threshold = threshold
        self.best = math.inf
        self.num_bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if not math.isfinite(val_loss):
            raise ContractViolation(f"plateau scheduler needs a finite loss, got {val_loss}")
        if val_loss < self.best - self.threshold:
            self.best = val_loss
            self.num_bad_epochs = 0
        else:
            self.num_bad_epochs += 1
            if self.num_bad_epochs >= self.patience:
                old_lr = self.lr
                self.lr = old_lr * self.factor
                self.num_bad_epochs = 0
                logger.info(f"Validation loss plateaued at {self.best:.6g}; lr {old_lr:.3g} -> {self.lr:.3g}")
        return self.lr


def plateau_step(scheduler: PlateauScheduler, epoch_val_loss: float) -> float:
    return scheduler.step(epoch_val_loss)
