"""Fixed-length IMU windows paired with mean ground-truth velocity targets."""

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.core.errors import ContractViolation, MissingGroundTruthError
from src.dataio.frames import to_navigation_frame
from src.dataio.sequence import SequenceRecord

logger = logging.getLogger(__name__)

# Row order of every window: specific force then angular rate.
CHANNELS = ("fx", "fy", "fz", "wx", "wy", "wz")


@dataclass
class WindowedDataset:
    """
    Stacked training windows.

    inputs: [M×6×N] navigation-frame (f, w); targets: [M×2] velocity in m/s.
    source_ids and start_indices identify where each window came from.
    """

    inputs: np.ndarray
    targets: np.ndarray
    source_ids: list[str]
    start_indices: np.ndarray
    window_n: int
    stride: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.targets = np.asarray(self.targets)
        self.start_indices = np.asarray(self.start_indices, dtype=np.int64)
        self.source_ids = list(self.source_ids)
        m = len(self.inputs)
        if self.inputs.ndim != 3 or self.inputs.shape[1:] != (6, self.window_n):
            raise ContractViolation(f"inputs must be [M×6×{self.window_n}], got {self.inputs.shape}")
        if self.targets.shape != (m, 2) or len(self.source_ids) != m or len(self.start_indices) != m:
            raise ContractViolation("inputs, targets, source ids and start indices must align")
        if not np.all(np.isfinite(self.inputs)):
            raise ContractViolation("window inputs contain non-finite values")
        if not np.all(np.isfinite(self.targets)):
            raise ContractViolation("window targets contain non-finite values")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def windows(self) -> Iterator[tuple[np.ndarray, np.ndarray, str, int]]:
        for i in range(len(self)):
            yield self.inputs[i], self.targets[i], self.source_ids[i], int(self.start_indices[i])

    @property
    def sequence_ids(self) -> set[str]:
        return set(self.source_ids)

    def subset(self, indices: Sequence[int]) -> "WindowedDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return WindowedDataset(
            inputs=self.inputs[indices],
            targets=self.targets[indices],
            source_ids=[self.source_ids[i] for i in indices],
            start_indices=self.start_indices[indices],
            window_n=self.window_n,
            stride=self.stride,
        )


def _navigation_features(seq: SequenceRecord) -> np.ndarray:
    """6×L feature matrix (fx,fy,fz,wx,wy,wz) in the navigation frame."""
    if seq.has_orientation:
        seq = to_navigation_frame(seq)
    else:
        logger.debug(f"Sequence '{seq.id}' has no orientation; treating readings as navigation-frame")
    return np.concatenate([seq.accel.T, seq.gyro.T], axis=0)


def window_starts(length: int, window_n: int, stride: int) -> np.ndarray:
    """Every admissible start index for the given stride: floor((L-N)/stride)+1 of them."""
    if window_n < 1 or stride < 1:
        raise ContractViolation(f"window_n and stride must be positive, got {window_n}, {stride}")
    if length < window_n:
        raise ContractViolation(f"sequence of {length} samples is shorter than window_n={window_n}")
    return np.arange(0, length - window_n + 1, stride, dtype=np.int64)


def extract_inputs(seq: SequenceRecord, window_n: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ([M×6×N] navigation-frame inputs, start indices) for `seq`."""
    starts = window_starts(len(seq), window_n, stride)
    features = _navigation_features(seq)
    # view shape (6, L-N+1, N) -> (M, 6, N)
    view = sliding_window_view(features, window_n, axis=1)[:, starts, :]
    return np.ascontiguousarray(view.transpose(1, 0, 2)), starts


def window_dataset(seq: SequenceRecord, window_n: int, stride: int) -> WindowedDataset:
    """
    Cut `seq` into windows [i, i+N) with target (p[i+N-1] - p[i]) / (t[i+N-1] - t[i]).

    Raises:
        MissingGroundTruthError: the sequence has no positions.
        ContractViolation: window_n < 2, stride < 1 or sequence shorter than window_n.
    """
    if seq.gt_pos is None:
        raise MissingGroundTruthError(f"sequence '{seq.id}' has no ground-truth positions")
    if window_n < 2:
        raise ContractViolation(f"window_n must be at least 2 to define a velocity, got {window_n}")
    inputs, starts = extract_inputs(seq, window_n, stride)
    ends = starts + window_n - 1
    displacement = seq.gt_pos[ends] - seq.gt_pos[starts]
    elapsed = (seq.t[ends] - seq.t[starts])[:, None]
    dataset = WindowedDataset(
        inputs=inputs,
        targets=displacement / elapsed,
        source_ids=[seq.id] * len(starts),
        start_indices=starts,
        window_n=window_n,
        stride=stride,
    )
    logger.info(f"Sequence '{seq.id}': {len(dataset)} windows (N={window_n}, stride={stride})")
    return dataset


def concat_datasets(datasets: Sequence[WindowedDataset]) -> WindowedDataset:
    """Merge datasets with a common window length."""
    datasets = list(datasets)
    if not datasets:
        raise ContractViolation("concat_datasets needs at least one dataset")
    window_n = datasets[0].window_n
    if any(d.window_n != window_n for d in datasets):
        raise ContractViolation(f"cannot merge datasets with different window_n: {[d.window_n for d in datasets]}")
    return WindowedDataset(
        inputs=np.concatenate([d.inputs for d in datasets]),
        targets=np.concatenate([d.targets for d in datasets]),
        source_ids=[sid for d in datasets for sid in d.source_ids],
        start_indices=np.concatenate([d.start_indices for d in datasets]),
        window_n=window_n,
        stride=datasets[0].stride,
    )
