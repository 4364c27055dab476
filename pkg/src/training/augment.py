"""Heading-agnostic augmentation: a random yaw applied to inputs and targets together."""

import numpy as np


def random_yaw(
    inputs: np.ndarray, targets: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """
    Rotate each window about the vertical axis by an angle drawn uniformly in [0, 2π).

    inputs: [B×6×N] rows fx,fy,fz,wx,wy,wz; targets: [B×2]. Vertical components
    (fz, wz) are unchanged.
    """
    angles = rng.uniform(0.0, 2 * np.pi, size=len(inputs))
    c = np.cos(angles).astype(inputs.dtype)
    s = np.sin(angles).astype(inputs.dtype)
    rotated = inputs.copy()
    for x_row, y_row in ((0, 1), (3, 4)):
        x = inputs[:, x_row, :]
        y = inputs[:, y_row, :]
        rotated[:, x_row, :] = c[:, None] * x - s[:, None] * y
        rotated[:, y_row, :] = s[:, None] * x + c[:, None] * y
    new_targets = np.column_stack(
        [c * targets[:, 0] - s * targets[:, 1], s * targets[:, 0] + c * targets[:, 1]]
    ).astype(targets.dtype)
    return rotated, new_targets
