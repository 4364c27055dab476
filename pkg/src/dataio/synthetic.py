"""
Synthetic pedestrian IMU sequences with exact ground truth.

A path is generated analytically in a local frame, rotated by the initial
heading, and differentiated in closed form. The device is held level and
pointed along the direction of travel, so its orientation is a pure yaw;
device-frame readings are the navigation-frame quantities rotated by the
inverse of that yaw.

Optional gait: a vertical bounce g + A·sin(ωt) at the step frequency
ω = 2π·speed/step_length, and a forward surge of amplitude A/2 in quadrature
(A/2·cos ωt along the path). The surge's velocity and displacement are part of
the ground truth, so position, velocity and specific force stay consistent.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional

import numpy as np

from src.core.errors import ContractViolation
from src.dataio.frames import rotate, yaw_quaternions
from src.dataio.sequence import SequenceRecord
from src.odometry.trajectory import VelocitySeries

logger = logging.getLogger(__name__)

GRAVITY = 9.80665
PATH_TYPES = ("line", "circle", "figure_sine")


@dataclass
class SyntheticConfig:
    path_type: str = "line"
    speed: float = 1.0
    duration: float = 10.0
    sample_rate: float = 200.0
    noise_std_accel: float = 0.0
    noise_std_gyro: float = 0.0
    rng_seed: int = 0
    heading: float = 0.0
    radius: float = 5.0
    weave_amplitude: float = 1.0
    weave_period: float = 4.0
    gait: bool = False
    step_length: float = 0.67
    step_accel_amplitude: float = 2.0
    sequence_id: Optional[str] = None

    def __post_init__(self):
        if self.path_type not in PATH_TYPES:
            raise ContractViolation(f"path_type must be one of {PATH_TYPES}, got '{self.path_type}'")
        for name in ("speed", "duration", "sample_rate", "radius", "weave_period", "step_length"):
            if getattr(self, name) <= 0:
                raise ContractViolation(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("noise_std_accel", "noise_std_gyro", "weave_amplitude", "step_accel_amplitude"):
            if getattr(self, name) < 0:
                raise ContractViolation(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.gait:
            omega = 2 * np.pi * self.speed / self.step_length
            if 0.5 * self.step_accel_amplitude / omega >= self.speed:
                raise ContractViolation("gait surge would reverse the direction of travel; lower step_accel_amplitude")

    @property
    def resolved_id(self) -> str:
        return self.sequence_id or f"synthetic-{self.path_type}-{self.rng_seed}"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "SyntheticConfig":
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractViolation(f"Unknown SyntheticConfig keys: {sorted(unknown)}")
        return cls(**dict(values))


def _progress(config: SyntheticConfig, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance along the path q(t) with its first and second derivatives."""
    q = config.speed * t
    dq = np.full_like(t, config.speed)
    ddq = np.zeros_like(t)
    if config.gait:
        omega = 2 * np.pi * config.speed / config.step_length
        surge = 0.5 * config.step_accel_amplitude
        q = q + surge / omega**2 * (1.0 - np.cos(omega * t))
        dq = dq + surge / omega * np.sin(omega * t)
        ddq = ddq + surge * np.cos(omega * t)
    return q, dq, ddq


def _local_path(config: SyntheticConfig, t: np.ndarray):
    """Position, velocity and acceleration (each [n×2]) before rotation by the heading."""
    q, dq, ddq = _progress(config, t)
    if config.path_type == "line":
        zeros = np.zeros_like(t)
        return (
            np.column_stack([q, zeros]),
            np.column_stack([dq, zeros]),
            np.column_stack([ddq, zeros]),
        )
    if config.path_type == "circle":
        r = config.radius
        phi = q / r
        c, s = np.cos(phi), np.sin(phi)
        pos = np.column_stack([r * s, r * (1.0 - c)])
        vel = dq[:, None] * np.column_stack([c, s])
        acc = ddq[:, None] * np.column_stack([c, s]) + (dq**2 / r)[:, None] * np.column_stack([-s, c])
        return pos, vel, acc
    # figure_sine: lateral weave y = A·sin(k·q) along the direction of travel
    a = config.weave_amplitude
    k = 2 * np.pi / (config.speed * config.weave_period)
    c, s = np.cos(k * q), np.sin(k * q)
    pos = np.column_stack([q, a * s])
    vel = np.column_stack([dq, a * k * c * dq])
    acc = np.column_stack([ddq, -a * k**2 * s * dq**2 + a * k * c * ddq])
    return pos, vel, acc


def _rotate2d(vectors: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return vectors @ np.array([[c, s], [-s, c]])


def synthesize_with_truth(config: SyntheticConfig) -> tuple[SequenceRecord, VelocitySeries]:
    """Generate a sequence and the exact per-sample velocity it was built from."""
    n = int(round(config.duration * config.sample_rate)) + 1
    t = np.arange(n, dtype=np.float64) / config.sample_rate

    pos, vel, acc = (_rotate2d(v, config.heading) for v in _local_path(config, t))
    # yaw rate is rotation invariant: (vx·ay − vy·ax) / |v|²
    yaw_rate = (vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]) / np.sum(vel**2, axis=1)
    yaw = np.unwrap(np.arctan2(vel[:, 1], vel[:, 0]))

    vertical = np.full(n, GRAVITY)
    if config.gait:
        omega = 2 * np.pi * config.speed / config.step_length
        vertical = vertical + config.step_accel_amplitude * np.sin(omega * t)

    accel_nav = np.column_stack([acc, vertical])
    gyro_nav = np.column_stack([np.zeros(n), np.zeros(n), yaw_rate])
    orientation = yaw_quaternions(yaw)

    rng = np.random.default_rng(config.rng_seed)
    accel_noise = rng.normal(0.0, 1.0, size=(n, 3)) * config.noise_std_accel
    gyro_noise = rng.normal(0.0, 1.0, size=(n, 3)) * config.noise_std_gyro

    record = SequenceRecord(
        id=config.resolved_id,
        t=t,
        gyro=rotate(orientation, gyro_nav, inverse=True) + gyro_noise,
        accel=rotate(orientation, accel_nav, inverse=True) + accel_noise,
        orientation=orientation,
        gt_pos=pos,
        sample_rate=config.sample_rate,
    )
    truth = VelocitySeries(t, vel[:, 0], vel[:, 1], start_time=-1.0 / config.sample_rate)
    logger.info(
        f"Synthesised {config.path_type} sequence '{record.id}': {n} samples over "
        f"{config.duration}s at {config.speed} m/s (gait={config.gait})"
    )
    return record, truth


def synthesize(config: SyntheticConfig) -> SequenceRecord:
    return synthesize_with_truth(config)[0]
