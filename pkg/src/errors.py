"""
Exception hierarchy for the simulator. Every class carries the exit code the
command-line surface reports for it.
"""
from typing import Optional


class SimulationError(Exception):
    """Base class for all simulator failures."""

    exit_code = 3

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(SimulationError):
    exit_code = 1


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.constraint = message


class DomainError(SimulationError, ValueError):
    """Input outside the domain of a model function."""

    exit_code = 1


class ShapeMismatchError(DomainError):
    pass


class PreconditionError(SimulationError, ValueError):
    """An analysis was asked for outside the regime where it is meaningful."""

    exit_code = 1


class ExtinctWindowError(PreconditionError):
    pass


class PositivityViolationError(SimulationError):
    exit_code = 2

    def __init__(self, message: str, worst: float, node: Optional[int], time: float, trajectory=None):
        super().__init__(message, trajectory)
        self.worst = worst
        self.node = node
        self.time = time


class BlowupError(SimulationError):
    exit_code = 3


class CFLViolationError(BlowupError):
    pass


class SingularSystemError(BlowupError):
    """Zero pivot in a linear solve."""


class SingularityError(SimulationError):
    """State left the region where 1 + chi*n >= 1/2."""

    exit_code = 4


class InvariantCheckFailed(SimulationError):
    exit_code = 5
