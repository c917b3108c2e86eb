"""Exception types shared across the package."""


class PpmhdError(Exception):
    """Base class for all package errors."""


class MhdDomainError(PpmhdError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PreconditionError(PpmhdError, ValueError):
    """A stated precondition of an operation was violated."""


class DegenerateInputError(PpmhdError, ValueError):
    """Input hits a removable degeneracy (e.g. vanishing denominator)."""


class InvariantViolationError(PpmhdError, RuntimeError):
    """A guaranteed invariant failed at runtime; indicates a bug upstream."""


class InadmissibleStateError(PpmhdError, RuntimeError):
    """A computed state left the admissible set.

    Carries the offending cell index and simulation time when known.
    """

    def __init__(self, message, cell=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.time = time


class NumericalBlowupError(PpmhdError, RuntimeError):
    """NaN or infinity produced by an update; carries the first bad cell."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class ConfigError(PpmhdError, ValueError):
    """Malformed run configuration."""
