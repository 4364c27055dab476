"""Position reconstruction from horizontal velocities."""

import logging
from typing import Optional, Sequence

import numpy as np

from src.core.errors import ContractViolation
from src.dataio.sequence import SequenceRecord
from src.dataio.windows import extract_inputs
from src.nn.velonet import VeloNet
from src.odometry.trajectory import Trajectory, VelocitySeries
from src.training.trainer import predict

logger = logging.getLogger(__name__)


def integrate_velocity(v: VelocitySeries, origin: Sequence[float] = (0.0, 0.0)) -> Trajectory:
    """
    Left-rectangle integration: p_i = p_0 + Σ_{j≤i} v_j·Δt_j.

    The trajectory has len(v)+1 points; point 0 is `origin` at the series'
    start time and point i sits at timestamps[i-1].
    """
    if len(origin) != 2:
        raise ContractViolation(f"origin must be (x, y), got {origin}")
    dt = v.intervals()
    if np.any(dt <= 0):
        raise ContractViolation("velocity timestamps must be strictly increasing from the start time")
    timestamps = np.concatenate([[v.resolved_start()], v.timestamps])
    px = origin[0] + np.concatenate([[0.0], np.cumsum(v.vx * dt)])
    py = origin[1] + np.concatenate([[0.0], np.cumsum(v.vy * dt)])
    return Trajectory(timestamps, px, py)


def _extended_times(t: np.ndarray, last_index: int, nominal_dt: float) -> np.ndarray:
    """Timestamps for indices 0..last_index, extrapolated past the end at the nominal rate."""
    if last_index < len(t):
        return t[: last_index + 1]
    extra = t[-1] + nominal_dt * np.arange(1, last_index - len(t) + 2)
    return np.concatenate([t, extra])


def predict_velocity_series(
    net: VeloNet, seq: SequenceRecord, stride: Optional[int] = None, batch_size: int = 512
) -> VelocitySeries:
    """
    Network velocities for a sequence.

    Window k starting at sample s stands for the N sample intervals
    (t[s], t[s+N]]. With stride == N (default) each window contributes one
    velocity sample; with a smaller stride every interval gets the mean of
    the windows covering it. Intervals past the last sample are timed at the
    nominal sample rate.
    """
    window_n = net.config.window_n
    stride = stride or window_n
    if stride > window_n:
        raise ContractViolation(f"stride {stride} exceeds window_n {window_n}; intervals would be skipped")
    inputs, starts = extract_inputs(seq, window_n, stride)
    velocities = predict(net, inputs, batch_size).astype(np.float64)
    nominal_dt = 1.0 / seq.sample_rate
    last = int(starts[-1]) + window_n
    times = _extended_times(seq.t, last, nominal_dt)

    if stride == window_n:
        stamps = times[starts + window_n]
        return VelocitySeries(stamps, velocities[:, 0], velocities[:, 1], start_time=float(seq.t[0]))

    # interval j (1-based) spans (times[j-1], times[j]]; window at s covers j = s+1 .. s+N
    sums = np.zeros((last + 1, 2))
    counts = np.zeros(last + 1)
    for start, vel in zip(starts, velocities):
        sums[start + 1 : start + window_n + 1] += vel
        counts[start + 1 : start + window_n + 1] += 1
    mean = sums[1:] / counts[1:, None]
    return VelocitySeries(times[1:], mean[:, 0], mean[:, 1], start_time=float(seq.t[0]))


def reconstruct_from_network(
    net: VeloNet,
    seq: SequenceRecord,
    stride: Optional[int] = None,
    origin: Optional[Sequence[float]] = None,
    batch_size: int = 512,
) -> Trajectory:
    """Predict per-window velocities and integrate them from the ground-truth start (or (0, 0))."""
    if origin is None:
        origin = tuple(seq.gt_pos[0]) if seq.gt_pos is not None else (0.0, 0.0)
    series = predict_velocity_series(net, seq, stride, batch_size)
    trajectory = integrate_velocity(series, origin)
    logger.info(
        f"Reconstructed '{seq.id}': {len(series)} velocity samples, path length {trajectory.length():.2f} m"
    )
    return trajectory
