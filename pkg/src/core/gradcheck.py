"""Finite-difference verification of tape gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import Tape, Tensor, backward, zero_grad

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    """Per-parameter maximum relative error between analytic and numeric gradients."""

    max_relative_error: dict[str, float]
    tolerance: float
    checked_elements: int = 0
    worst_parameter: Optional[str] = None
    step: float = 1e-5
    details: dict[str, int] = field(default_factory=dict)

    @property
    def overall_max_error(self) -> float:
        return max(self.max_relative_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.overall_max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "overall_max_error": self.overall_max_error,
            "worst_parameter": self.worst_parameter,
            "checked_elements": self.checked_elements,
            "max_relative_error": dict(self.max_relative_error),
        }


def relative_error(analytic: float, numeric: float, floor: float = DENOMINATOR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _scalar_value(f: Callable[[], Tensor]) -> float:
    out = f()
    if out.size != 1:
        raise ContractViolation(f"grad_check needs a scalar function, got shape {out.shape}")
    value = float(out.data.reshape(-1)[0])
    if not np.isfinite(value):
        raise ContractViolation(f"grad_check: function value is not finite ({value})")
    return value


def grad_check(
    f: Callable[[], Tensor],
    params: Union[Sequence[Tensor], Mapping[str, Tensor]],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    max_elements: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tape_factory: Callable[[], Tape] = Tape,
) -> GradCheckReport:
    """
    Compare tape gradients of a scalar function against central finite differences.

    Args:
        f: Deterministic zero-argument function returning a scalar Tensor. It must
            read the parameters' `.data` each call.
        params: Tensors to differentiate (sequence or name -> tensor mapping).
        tolerance: Pass threshold on the maximum relative error.
        step: Finite-difference step.
        max_elements: If set, check at most this many randomly chosen elements
            per parameter.
        rng: Generator used for element subsampling.
        tape_factory: Builds the tape for the analytic pass.

    Returns:
        GradCheckReport; relative error uses max(|analytic|, |numeric|, 1e-8).
    """
    if isinstance(params, Mapping):
        named = list(params.items())
    else:
        named = [(p.name or f"param{i}", p) for i, p in enumerate(params)]
    tensors = [p for _, p in named]
    for name, p in named:
        if not np.all(np.isfinite(p.data)):
            raise ContractViolation(f"grad_check: parameter '{name}' is not finite")
        if p.dtype != np.float64:
            logger.warning(f"grad_check on {p.dtype} parameter '{name}'; float64 recommended")

    rng = rng if rng is not None else np.random.default_rng(0)

    zero_grad(tensors)
    for p in tensors:
        p.requires_grad = True
    with tape_factory() as tape:
        loss = f()
        if loss.size != 1 or not np.isfinite(loss.data).all():
            raise ContractViolation("grad_check: function must return a finite scalar")
        backward(loss, tape)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for name, p in named}

    errors: dict[str, float] = {}
    checked = 0
    details: dict[str, int] = {}
    for name, p in named:
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            indices = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        worst = 0.0
        grad_flat = analytic[name].reshape(-1)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + step
            f_plus = _scalar_value(f)
            flat[idx] = original - step
            f_minus = _scalar_value(f)
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2 * step)
            worst = max(worst, relative_error(float(grad_flat[idx]), numeric))
        errors[name] = worst
        details[name] = int(indices.size)
        checked += int(indices.size)

    worst_name = max(errors, key=errors.get) if errors else None
    report = GradCheckReport(
        max_relative_error=errors,
        tolerance=tolerance,
        checked_elements=checked,
        worst_parameter=worst_name,
        step=step,
        details=details,
    )
    logger.info(
        f"Gradient check over {checked} elements: max relative error "
        f"{report.overall_max_error:.3e} (tolerance {tolerance:.1e}) -> "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    return report
