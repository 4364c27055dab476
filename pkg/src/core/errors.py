"""Exception hierarchy for the odometry pipeline.

Library code raises these; only the CLI turns them into messages and exit codes.
"""

from typing import Optional


class VelonetError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(VelonetError, ValueError):
    """An operation was called outside its documented preconditions."""


class NonFiniteError(VelonetError, ArithmeticError):
    """A NaN or Inf appeared where finite values are required."""


class NonFiniteGradientError(NonFiniteError):
    """Gradient of a named parameter contains NaN/Inf."""

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"Non-finite gradient for parameter '{parameter}'")


class NonFiniteLossError(NonFiniteError):
    """Training loss became NaN/Inf."""

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"Non-finite loss {value!r} at epoch {epoch}, batch {batch}")


class ConfigMismatchError(VelonetError, ValueError):
    """A weight file was saved with a different network configuration."""


class CorruptWeightsError(VelonetError, ValueError):
    """A weight file cannot be parsed."""


class SequenceParseError(VelonetError, ValueError):
    """A sequence CSV is malformed.

    `row` is the 1-based data row (header excluded) when the problem is row-specific.
    """

    def __init__(self, message: str, row: Optional[int] = None, path: Optional[str] = None):
        self.row = row
        self.path = path
        location = f"row {row}: " if row is not None else ""
        source = f"{path}: " if path else ""
        super().__init__(f"{source}{location}{message}")


class MissingGroundTruthError(VelonetError, ValueError):
    """Ground-truth positions are required but absent."""


class MissingOrientationError(VelonetError, ValueError):
    """Device orientation is required but absent."""
