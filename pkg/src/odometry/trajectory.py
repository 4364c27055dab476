"""Velocity and position time series, plus trajectory CSV I/O."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.core.errors import ContractViolation, SequenceParseError

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["t", "px", "py"]


def _as_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass
class VelocitySeries:
    """
    Horizontal velocity samples.

    Sample j holds the velocity over the interval (t[j-1], t[j]]; the first
    interval starts at `start_time`. When `start_time` is omitted it is
    extrapolated one nominal interval before t[0].
    """

    timestamps: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    start_time: Optional[float] = None

    def __post_init__(self):
        self.timestamps = _as_1d(self.timestamps, "timestamps")
        self.vx = _as_1d(self.vx, "vx")
        self.vy = _as_1d(self.vy, "vy")
        n = len(self.timestamps)
        if n < 1 or len(self.vx) != n or len(self.vy) != n:
            raise ContractViolation(
                f"velocity series needs equal non-empty arrays, got t={n} vx={len(self.vx)} vy={len(self.vy)}"
            )
        if not (np.all(np.isfinite(self.timestamps)) and np.all(np.isfinite(self.vx)) and np.all(np.isfinite(self.vy))):
            raise ContractViolation("velocity series contains non-finite values")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            bad = int(np.argmax(np.diff(self.timestamps) <= 0)) + 1
            raise ContractViolation(f"velocity timestamps must be strictly increasing (index {bad})")
        if self.start_time is not None:
            self.start_time = float(self.start_time)
            if self.start_time >= self.timestamps[0]:
                raise ContractViolation(
                    f"start_time {self.start_time} must precede the first timestamp {self.timestamps[0]}"
                )

    def __len__(self) -> int:
        return len(self.timestamps)

    def resolved_start(self) -> float:
        if self.start_time is not None:
            return self.start_time
        if len(self.timestamps) < 2:
            raise ContractViolation("a single-sample velocity series needs an explicit start_time")
        return float(self.timestamps[0] - (self.timestamps[1] - self.timestamps[0]))

    def intervals(self) -> np.ndarray:
        """Δt_j = t_j − t_{j−1} with t_0 the resolved start time."""
        return np.diff(np.concatenate([[self.resolved_start()], self.timestamps]))

    @property
    def velocities(self) -> np.ndarray:
        return np.column_stack([self.vx, self.vy])


@dataclass
class Trajectory:
    """Timestamped 2D positions in metres."""

    timestamps: np.ndarray
    px: np.ndarray
    py: np.ndarray

    def __post_init__(self):
        self.timestamps = _as_1d(self.timestamps, "timestamps")
        self.px = _as_1d(self.px, "px")
        self.py = _as_1d(self.py, "py")
        n = len(self.timestamps)
        if n < 1 or len(self.px) != n or len(self.py) != n:
            raise ContractViolation(
                f"trajectory needs equal non-empty arrays, got t={n} px={len(self.px)} py={len(self.py)}"
            )
        if not (np.all(np.isfinite(self.timestamps)) and np.all(np.isfinite(self.px)) and np.all(np.isfinite(self.py))):
            raise ContractViolation("trajectory contains non-finite values")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.px, self.py])

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.px[-1]), float(self.py[-1])

    def length(self) -> float:
        """Path length in metres (sum of segment lengths)."""
        if len(self) < 2:
            return 0.0
        return float(np.sum(np.hypot(np.diff(self.px), np.diff(self.py))))

    def translate(self, dx: float, dy: float) -> "Trajectory":
        return Trajectory(self.timestamps.copy(), self.px + dx, self.py + dy)

    def resample(self, timestamps: Sequence[float]) -> "Trajectory":
        """Linearly interpolate positions at `timestamps` (held constant outside the covered span)."""
        target = _as_1d(timestamps, "timestamps")
        if len(self) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ContractViolation("resampling needs strictly increasing source timestamps")
        outside = (target < self.timestamps[0]) | (target > self.timestamps[-1])
        if np.any(outside):
            logger.warning(
                f"{int(outside.sum())} resample timestamps lie outside "
                f"[{self.timestamps[0]}, {self.timestamps[-1]}]; holding end positions"
            )
        return Trajectory(
            target,
            np.interp(target, self.timestamps, self.px),
            np.interp(target, self.timestamps, self.py),
        )


def save_trajectory(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """Write `t,px,py` rows with round-trip float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {"t": trajectory.timestamps, "px": trajectory.px, "py": trajectory.py},
        columns=TRAJECTORY_COLUMNS,
    )
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(trajectory)} trajectory points to {path}")
    return path


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trajectory file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SequenceParseError(f"cannot parse trajectory CSV ({e})", path=str(path)) from e
    missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise SequenceParseError(f"missing columns {missing}", path=str(path))
    values = frame[TRAJECTORY_COLUMNS].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_rows = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad_rows.size:
        raise SequenceParseError("non-numeric or missing value", row=int(bad_rows[0]) + 1, path=str(path))
    if len(values) == 0:
        raise SequenceParseError("trajectory has no rows", path=str(path))
    return Trajectory(values[:, 0], values[:, 1], values[:, 2])
