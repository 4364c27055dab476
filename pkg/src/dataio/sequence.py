"""
IMU sequences and the canonical sequence CSV.

CSV header: t,gx,gy,gz,ax,ay,az,qw,qx,qy,qz,px,py
- t in seconds, strictly increasing
- gx..gz angular rate (rad/s), ax..az specific force (m/s², gravity included), device frame
- qw..qz unit quaternion rotating device vectors into the navigation frame (optional group)
- px,py ground-truth horizontal position in metres (optional group)
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd

from src.core.errors import ContractViolation, SequenceParseError

logger = logging.getLogger(__name__)

TIME_COLUMN = "t"
GYRO_COLUMNS = ["gx", "gy", "gz"]
ACCEL_COLUMNS = ["ax", "ay", "az"]
QUAT_COLUMNS = ["qw", "qx", "qy", "qz"]
POS_COLUMNS = ["px", "py"]
CANONICAL_COLUMNS = [TIME_COLUMN, *GYRO_COLUMNS, *ACCEL_COLUMNS, *QUAT_COLUMNS, *POS_COLUMNS]

QUAT_UNIT_TOLERANCE = 1e-6
QUAT_RENORMALIZE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray
    orientation: Optional[np.ndarray] = None
    gt_pos: Optional[np.ndarray] = None


@dataclass
class SequenceRecord:
    """A time-ordered IMU recording stored column-wise."""

    id: str
    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    orientation: Optional[np.ndarray] = None
    gt_pos: Optional[np.ndarray] = None
    sample_rate: Optional[float] = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.gyro = np.asarray(self.gyro, dtype=np.float64)
        self.accel = np.asarray(self.accel, dtype=np.float64)
        n = len(self.t)
        if self.t.ndim != 1 or n < 2:
            raise ContractViolation(f"sequence '{self.id}' needs at least 2 samples")
        if self.gyro.shape != (n, 3) or self.accel.shape != (n, 3):
            raise ContractViolation(
                f"sequence '{self.id}': gyro {self.gyro.shape} and accel {self.accel.shape} must be ({n}, 3)"
            )
        if np.any(np.diff(self.t) <= 0):
            raise ContractViolation(f"sequence '{self.id}': timestamps must be strictly increasing")
        if self.orientation is not None:
            self.orientation = np.asarray(self.orientation, dtype=np.float64)
            if self.orientation.shape != (n, 4):
                raise ContractViolation(f"sequence '{self.id}': orientation must be ({n}, 4)")
            norms = np.linalg.norm(self.orientation, axis=1)
            if np.any(np.abs(norms - 1.0) > QUAT_UNIT_TOLERANCE):
                raise ContractViolation(f"sequence '{self.id}': orientation quaternions are not unit length")
        if self.gt_pos is not None:
            self.gt_pos = np.asarray(self.gt_pos, dtype=np.float64)
            if self.gt_pos.shape != (n, 2):
                raise ContractViolation(f"sequence '{self.id}': gt_pos must be ({n}, 2)")
        if self.sample_rate is None:
            self.sample_rate = float(1.0 / np.median(np.diff(self.t)))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def has_orientation(self) -> bool:
        return self.orientation is not None

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_pos is not None

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            yield ImuSample(
                t=float(self.t[i]),
                gyro=self.gyro[i],
                accel=self.accel[i],
                orientation=None if self.orientation is None else self.orientation[i],
                gt_pos=None if self.gt_pos is None else self.gt_pos[i],
            )

    def with_id(self, sequence_id: str) -> "SequenceRecord":
        return replace(self, id=sequence_id)


def _numeric_block(frame: pd.DataFrame, columns: list[str], path: Path) -> np.ndarray:
    values = frame[columns].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_rows = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0]) + 1
        bad_cols = [c for c, ok in zip(columns, np.isfinite(values[bad_rows[0]])) if not ok]
        raise SequenceParseError(f"non-numeric or missing value in {bad_cols}", row=row, path=str(path))
    return values


def _optional_group(frame: pd.DataFrame, columns: list[str], label: str, path: Path) -> bool:
    present = [c for c in columns if c in frame.columns]
    if present and len(present) != len(columns):
        missing = [c for c in columns if c not in frame.columns]
        raise SequenceParseError(f"{label} columns incomplete, missing {missing}", path=str(path))
    return bool(present)


def load_sequence(path: Union[str, Path], sequence_id: Optional[str] = None) -> SequenceRecord:
    """
    Read and validate a canonical sequence CSV.

    Quaternions within 1e-3 of unit length are renormalised; others are rejected.

    Raises:
        SequenceParseError: missing columns, non-numeric values, non-monotone time
            or bad quaternions; row numbers are 1-based data rows.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Sequence file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SequenceParseError(f"cannot parse CSV ({e})", path=str(path)) from e
    frame.columns = [str(c).strip() for c in frame.columns]

    required = [TIME_COLUMN, *GYRO_COLUMNS, *ACCEL_COLUMNS]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SequenceParseError(f"missing required columns {missing}", path=str(path))
    if len(frame) < 2:
        raise SequenceParseError(f"need at least 2 samples, found {len(frame)}", path=str(path))

    t = _numeric_block(frame, [TIME_COLUMN], path)[:, 0]
    non_increasing = np.flatnonzero(np.diff(t) <= 0)
    if non_increasing.size:
        row = int(non_increasing[0]) + 2
        raise SequenceParseError(
            f"timestamp {t[row - 1]} does not increase (previous {t[row - 2]})", row=row, path=str(path)
        )
    gyro = _numeric_block(frame, GYRO_COLUMNS, path)
    accel = _numeric_block(frame, ACCEL_COLUMNS, path)

    orientation = None
    if _optional_group(frame, QUAT_COLUMNS, "quaternion", path):
        orientation = _numeric_block(frame, QUAT_COLUMNS, path)
        norms = np.linalg.norm(orientation, axis=1)
        deviation = np.abs(norms - 1.0)
        bad = np.flatnonzero(deviation > QUAT_RENORMALIZE_TOLERANCE)
        if bad.size:
            raise SequenceParseError(
                f"quaternion norm {norms[bad[0]]:.6f} is not unit", row=int(bad[0]) + 1, path=str(path)
            )
        if np.any(deviation > QUAT_UNIT_TOLERANCE):
            logger.warning(f"{path}: renormalised {int((deviation > QUAT_UNIT_TOLERANCE).sum())} quaternions")
        orientation = orientation / norms[:, None]

    gt_pos = None
    if _optional_group(frame, POS_COLUMNS, "position", path):
        gt_pos = _numeric_block(frame, POS_COLUMNS, path)

    record = SequenceRecord(
        id=sequence_id or path.stem,
        t=t,
        gyro=gyro,
        accel=accel,
        orientation=orientation,
        gt_pos=gt_pos,
    )
    logger.info(
        f"Loaded sequence '{record.id}' from {path}: {len(record)} samples, "
        f"{record.sample_rate:.1f} Hz, orientation={record.has_orientation}, "
        f"ground truth={record.has_ground_truth}"
    )
    return record


def save_sequence(record: SequenceRecord, path: Union[str, Path]) -> Path:
    """Write `record` as canonical CSV; optional column groups are written only when present."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {TIME_COLUMN: record.t}
    data.update({c: record.gyro[:, i] for i, c in enumerate(GYRO_COLUMNS)})
    data.update({c: record.accel[:, i] for i, c in enumerate(ACCEL_COLUMNS)})
    if record.orientation is not None:
        data.update({c: record.orientation[:, i] for i, c in enumerate(QUAT_COLUMNS)})
    if record.gt_pos is not None:
        data.update({c: record.gt_pos[:, i] for i, c in enumerate(POS_COLUMNS)})
    pd.DataFrame(data).to_csv(path, index=False)
    logger.info(f"Wrote sequence '{record.id}' ({len(record)} samples) to {path}")
    return path
