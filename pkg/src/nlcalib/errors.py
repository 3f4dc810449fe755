"""Exception types raised by nlcalib."""


class NlcalibError(Exception):
    """Base class for all package errors."""


class KernelDomainError(NlcalibError, ValueError):
    """A singular kernel was evaluated at the origin, or a kernel is inadmissible."""


class PreconditionError(NlcalibError, ValueError):
    """An operation was called with inputs violating its contract."""


class ExteriorFrozenError(NlcalibError):
    """Attempted mutation of a frozen exterior cell."""


class FoliationMismatchError(PreconditionError):
    """The positive set of a foliation does not coincide with the set it should foliate."""

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = list(cells)


class SeparationError(PreconditionError):
    """A raised-graph construction comes too close to the complement of the exterior set."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class BudgetExceededError(NlcalibError):
    """Exhaustive enumeration would exceed the configured window budget."""


class ConfigError(NlcalibError):
    """Malformed or inconsistent scenario configuration."""
