"""Absolute and relative translation error between aligned 2D trajectories."""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from src.core.errors import ContractViolation
from src.odometry.trajectory import Trajectory

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["sequence_id", "ate_m", "rte_m", "n"]
SPLIT_COLUMN = "split"
SUMMARY_ID = "mean"
OVERALL_SPLIT = "all"
DEFAULT_RTE_INTERVAL = 60.0
TIMESTAMP_TOLERANCE = 1e-6


@dataclass
class EvaluationConfig:
    rte_interval: float = DEFAULT_RTE_INTERVAL

    def __post_init__(self):
        if self.rte_interval <= 0:
            raise ContractViolation(f"rte_interval must be positive, got {self.rte_interval}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "EvaluationConfig":
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractViolation(f"Unknown EvaluationConfig keys: {sorted(unknown)}")
        return cls(**dict(values))


@dataclass
class MetricResult:
    ate: float
    rte: float
    n: int
    rte_interval: float = DEFAULT_RTE_INTERVAL
    sequence_id: str = ""
    split: str = ""

    def __post_init__(self):
        if self.ate < 0 or self.rte < 0:
            raise ContractViolation(f"metrics must be non-negative, got ate={self.ate} rte={self.rte}")


def _check_aligned(pred: Trajectory, gt: Trajectory) -> None:
    if len(pred) != len(gt):
        raise ContractViolation(f"trajectory lengths differ: pred {len(pred)} vs gt {len(gt)}")
    if not np.allclose(pred.timestamps, gt.timestamps, rtol=0.0, atol=TIMESTAMP_TOLERANCE):
        raise ContractViolation("trajectory timestamps differ; resample the ground truth first")


def ate(pred: Trajectory, gt: Trajectory) -> float:
    """sqrt((1/n)·Σ‖p_i − p̂_i‖²) in metres."""
    _check_aligned(pred, gt)
    error = pred.positions - gt.positions
    return float(np.sqrt(np.mean(np.sum(error**2, axis=1))))


def rte(pred: Trajectory, gt: Trajectory, interval: float = DEFAULT_RTE_INTERVAL) -> float:
    """
    RMSE of displacement differences over a sliding window of `interval` seconds.

    k = round(interval / median Δt) samples. When the sequence is shorter than
    the interval (or k reaches n), the endpoint displacement error over the
    whole sequence is scaled by interval / duration instead.
    """
    _check_aligned(pred, gt)
    n = len(gt)
    if n < 2:
        raise ContractViolation(f"RTE needs at least 2 samples, got {n}")
    if interval <= 0:
        raise ContractViolation(f"RTE interval must be positive, got {interval}")
    duration = abs(float(gt.timestamps[-1] - gt.timestamps[0]))
    if duration <= 0:
        raise ContractViolation("RTE needs a trajectory with positive duration")

    p, q = gt.positions, pred.positions
    step = float(np.median(np.abs(np.diff(gt.timestamps))))
    k = max(1, int(round(interval / step)))
    if duration < interval or k >= n:
        endpoint = (p[-1] - p[0]) - (q[-1] - q[0])
        return float(np.linalg.norm(endpoint) * (interval / duration))

    error = (p[k:] - p[:-k]) - (q[k:] - q[:-k])
    return float(np.sqrt(np.mean(np.sum(error**2, axis=1))))


def evaluate(
    pred: Trajectory, gt: Trajectory, interval: float = DEFAULT_RTE_INTERVAL, sequence_id: str = ""
) -> MetricResult:
    result = MetricResult(
        ate=ate(pred, gt), rte=rte(pred, gt, interval), n=len(gt), rte_interval=interval, sequence_id=sequence_id
    )
    logger.info(f"{sequence_id or 'trajectory'}: ATE {result.ate:.3f} m, RTE {result.rte:.3f} m (n={result.n})")
    return result


def summarize(results: Sequence[MetricResult], split: str = "") -> MetricResult:
    """Mean row over `results`: every sequence weighs the same, n counts all samples."""
    if not results:
        raise ContractViolation("cannot summarise an empty set of results")
    return MetricResult(
        ate=float(np.mean([r.ate for r in results])),
        rte=float(np.mean([r.rte for r in results])),
        n=sum(r.n for r in results),
        rte_interval=results[0].rte_interval,
        sequence_id=SUMMARY_ID,
        split=split,
    )


def evaluate_pairs(
    pairs: Iterable[tuple[Trajectory, Trajectory, str, str]], interval: float = DEFAULT_RTE_INTERVAL
) -> list[MetricResult]:
    """
    Score `(pred, gt, sequence_id, split)` pairs, grouped by split in first-seen order.

    With more than one pair, each split's rows end with its `mean` row, and an
    overall `mean` row (split `all`) closes a report covering several splits.
    """
    groups: dict[str, list[MetricResult]] = {}
    for pred, gt, sequence_id, split in pairs:
        result = evaluate(pred, gt, interval, sequence_id)
        result.split = split
        groups.setdefault(split, []).append(result)
    scored = [r for group in groups.values() for r in group]
    if len(scored) <= 1:
        return scored

    rows: list[MetricResult] = []
    for split, group in groups.items():
        rows.extend(group)
        rows.append(summarize(group, split))
        logger.info(f"{split or 'all sequences'}: mean ATE {rows[-1].ate:.3f} m over {len(group)} sequences")
    if len(groups) > 1:
        rows.append(summarize(scored, OVERALL_SPLIT))
    return rows


def write_metric_report(results: Iterable[MetricResult], path: Union[str, Path]) -> Path:
    """Write `sequence_id,ate_m,rte_m,n` rows, led by a `split` column when any row has one."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results = list(results)
    columns = REPORT_COLUMNS
    if any(r.split for r in results):
        columns = [SPLIT_COLUMN, *REPORT_COLUMNS]
    rows = [
        {"split": r.split, "sequence_id": r.sequence_id, "ate_m": r.ate, "rte_m": r.rte, "n": r.n} for r in results
    ]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def read_metric_report(path: Union[str, Path]) -> list[MetricResult]:
    frame = pd.read_csv(
        path, float_precision="round_trip", dtype={"sequence_id": str, SPLIT_COLUMN: str}, keep_default_na=False
    )
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise ContractViolation(f"{path}: metric report lacks columns {missing}")
    return [
        MetricResult(
            ate=float(r.ate_m),
            rte=float(r.rte_m),
            n=int(r.n),
            sequence_id=str(r.sequence_id),
            split=str(getattr(r, SPLIT_COLUMN, "")),
        )
        for r in frame.itertuples(index=False)
    ]
