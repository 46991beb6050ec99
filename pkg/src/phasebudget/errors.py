"""Exception hierarchy shared by all modules."""


class PhaseBudgetError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PhaseBudgetError, ValueError):
    """Input violates a documented invariant.

    ``field`` names the offending field when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(PhaseBudgetError, ValueError):
    """Argument outside the mathematical domain of a function (e.g. x < 0)."""


class ParseError(PhaseBudgetError, ValueError):
    """Malformed document. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class SolverError(PhaseBudgetError, RuntimeError):
    """Dual search did not converge. ``bracket`` holds the final (lo, hi) multipliers."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ResourceLimitError(PhaseBudgetError, RuntimeError):
    """Requested work exceeds a configured size limit."""
