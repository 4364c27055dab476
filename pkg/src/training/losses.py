"""Velocity regression loss."""

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, as_tensor, reduce


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """
    Mean over the batch of the squared velocity error, summed over (vx, vy).

    ℓ = (1/B)·Σᵢ ((vxᵢ − v̂xᵢ)² + (vyᵢ − v̂yᵢ)²)
    """
    target = as_tensor(target, dtype=pred.dtype)
    if pred.shape != target.shape or pred.ndim != 2:
        raise ContractViolation(f"mse_loss needs equal [B×2] shapes, got {pred.shape} and {target.shape}")
    diff = pred - target
    per_sample = reduce("sum", diff * diff, axis=1)
    return reduce("mean", per_sample)
