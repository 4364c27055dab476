"""
Quaternion helpers and the device -> navigation frame transform.

Quaternions are stored scalar-first (w, x, y, z) and rotate device-frame
vectors into the gravity-aligned navigation frame: v_nav = R(q) v_dev.
Rotations are right-handed, so a 90° yaw maps the device x axis onto the
navigation y axis. scipy's Rotation expects scalar-last quaternions.
"""

from dataclasses import replace

import numpy as np
from scipy.spatial.transform import Rotation

from src.core.errors import MissingOrientationError
from src.dataio.sequence import SequenceRecord


def to_rotation(quaternions_wxyz: np.ndarray) -> Rotation:
    q = np.atleast_2d(np.asarray(quaternions_wxyz, dtype=np.float64))
    return Rotation.from_quat(q[:, [1, 2, 3, 0]])


def from_rotation(rotation: Rotation) -> np.ndarray:
    q = np.atleast_2d(rotation.as_quat())
    return q[:, [3, 0, 1, 2]]


def yaw_quaternions(yaw: np.ndarray) -> np.ndarray:
    """Scalar-first quaternions for rotations of `yaw` radians about the vertical axis."""
    half = 0.5 * np.asarray(yaw, dtype=np.float64)
    zeros = np.zeros_like(half)
    return np.column_stack([np.cos(half), zeros, zeros, np.sin(half)])


def yaw_from_quaternions(quaternions_wxyz: np.ndarray) -> np.ndarray:
    """Heading angle (ZYX Euler yaw) of each orientation, in radians."""
    return to_rotation(quaternions_wxyz).as_euler("ZYX")[:, 0]


def rotate(quaternions_wxyz: np.ndarray, vectors: np.ndarray, inverse: bool = False) -> np.ndarray:
    rotation = to_rotation(quaternions_wxyz)
    if inverse:
        rotation = rotation.inv()
    return rotation.apply(np.asarray(vectors, dtype=np.float64))


def to_navigation_frame(seq: SequenceRecord) -> SequenceRecord:
    """
    Rotate gyro and accel samples into the navigation frame.

    Gravity stays in the specific force. The returned record carries identity
    orientations because its readings are already navigation-frame.
    """
    if seq.orientation is None:
        raise MissingOrientationError(f"sequence '{seq.id}' has no orientation stream")
    identity = np.zeros_like(seq.orientation)
    identity[:, 0] = 1.0
    return replace(
        seq,
        gyro=rotate(seq.orientation, seq.gyro),
        accel=rotate(seq.orientation, seq.accel),
        orientation=identity,
    )
