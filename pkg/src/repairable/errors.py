"""Exception hierarchy.

Each class carries the CLI exit status it maps to, so the command layer can
translate library failures without a lookup table.
"""


class ReliabilityError(Exception):
    exit_code = 1


class ConfigError(ReliabilityError, ValueError):
    """Malformed configuration or input file."""

    exit_code = 2


class DomainError(ReliabilityError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class SingularityError(DomainError, ArithmeticError):
    """Quantity is unbounded at the requested point (e.g. hazard where R(t)=0)."""


class ModelValidityError(ReliabilityError, ValueError):
    """Invalid model or distribution parameters."""

    exit_code = 3


class InsufficientDataError(ReliabilityError):
    """Too few events to fit or estimate the requested quantity."""

    exit_code = 4

    def __init__(self, message, *, required=None, observed=None):
        super().__init__(message)
        self.required = required
        self.observed = observed


class InsufficientEventsError(InsufficientDataError):
    """No failures observed across simulated trajectories."""

    def __init__(self, message, *, n_trajectories):
        super().__init__(message, required=1, observed=0)
        self.n_trajectories = n_trajectories


class ConvergenceError(ReliabilityError, RuntimeError):
    exit_code = 4

    def __init__(self, message, *, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class EventValidationError(DomainError):
    """Resiliency events that are inconsistent with each other or the mission."""

    exit_code = 5


class PreconditionError(ReliabilityError):
    exit_code = 6
