"""Exception hierarchy shared by the simulation, analysis and runner layers."""

from typing import List, Optional


class SimulationError(Exception):
    """Base class for all errors raised by the simulator."""


class DomainError(SimulationError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConfigError(SimulationError):
    """A run configuration is unreadable or inconsistent."""


class ConvergenceError(SimulationError):
    """An iterative solver ran out of budget before meeting its tolerance."""

    def __init__(self, message: str, trace: Optional[List[float]] = None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class NumericalFault(SimulationError):
    """Non-finite numbers appeared during a computation."""


class StageError(SimulationError):
    """A runner stage failed; partial outputs stay on disk."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, StageError):
        return exit_code_for(error.cause)
    if isinstance(error, (ConfigError, DomainError, OSError)):
        return 1
    if isinstance(error, ConvergenceError):
        return 2
    return 3
