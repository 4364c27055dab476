"""Step-and-heading pedestrian dead reckoning baseline."""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

from src.core.errors import ContractViolation, MissingOrientationError
from src.dataio.frames import yaw_from_quaternions
from src.dataio.sequence import SequenceRecord
from src.odometry.trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class PdrConfig:
    step_length: float = 0.67
    accel_peak_threshold: float = 10.5
    min_step_interval: float = 0.3
    smoothing_window: int = 15

    def __post_init__(self):
        if self.step_length <= 0:
            raise ContractViolation(f"step_length must be positive, got {self.step_length}")
        if self.min_step_interval <= 0:
            raise ContractViolation(f"min_step_interval must be positive, got {self.min_step_interval}")
        if self.smoothing_window < 1:
            raise ContractViolation(f"smoothing_window must be >= 1, got {self.smoothing_window}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "PdrConfig":
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractViolation(f"Unknown PdrConfig keys: {sorted(unknown)}")
        return cls(**dict(values))


def detect_step_indices(accel_magnitude: np.ndarray, timestamps: np.ndarray, config: PdrConfig) -> np.ndarray:
    """Sample indices of peaks in the smoothed magnitude above the threshold, at least min_step_interval apart."""
    magnitude = np.asarray(accel_magnitude, dtype=np.float64)
    timestamps = np.asarray(timestamps, dtype=np.float64)
    if magnitude.shape != timestamps.shape or magnitude.ndim != 1:
        raise ContractViolation("accel magnitude and timestamps must be equal-length 1D arrays")
    if len(magnitude) < max(config.smoothing_window, 2):
        logger.warning(
            f"Series of {len(magnitude)} samples is shorter than the smoothing window "
            f"({config.smoothing_window}); no steps detected"
        )
        return np.zeros(0, dtype=np.int64)

    smoothed = uniform_filter1d(magnitude, size=config.smoothing_window, mode="nearest")
    sample_rate = 1.0 / float(np.median(np.diff(timestamps)))
    distance = max(1, math.ceil(config.min_step_interval * sample_rate))
    peaks, _ = signal.find_peaks(smoothed, height=config.accel_peak_threshold, distance=distance)
    return peaks.astype(np.int64)


def detect_steps(accel_magnitude: np.ndarray, timestamps: np.ndarray, config: PdrConfig) -> list[float]:
    indices = detect_step_indices(accel_magnitude, timestamps, config)
    return [float(timestamps[i]) for i in indices]


def pdr_track(
    seq: SequenceRecord, config: PdrConfig, origin: Optional[Sequence[float]] = None
) -> Trajectory:
    """
    Advance `step_length` along the device yaw at every detected step.

    The first point is the origin at the first sample time (ground-truth start
    when available, else (0, 0)); one point follows per step.
    """
    if seq.orientation is None:
        raise MissingOrientationError(f"PDR needs device orientation; sequence '{seq.id}' has none")
    if origin is None:
        origin = tuple(seq.gt_pos[0]) if seq.gt_pos is not None else (0.0, 0.0)

    magnitude = np.linalg.norm(seq.accel, axis=1)
    steps = detect_step_indices(magnitude, seq.t, config)
    heading = yaw_from_quaternions(seq.orientation)[steps]
    px = origin[0] + np.concatenate([[0.0], np.cumsum(config.step_length * np.cos(heading))])
    py = origin[1] + np.concatenate([[0.0], np.cumsum(config.step_length * np.sin(heading))])
    timestamps = np.concatenate([[seq.t[0]], seq.t[steps]])
    if len(steps) == 0:
        logger.warning(f"No steps detected in '{seq.id}'")
    else:
        logger.info(f"PDR on '{seq.id}': {len(steps)} steps, {len(steps) * config.step_length:.2f} m walked")
    return Trajectory(timestamps, px, py)
