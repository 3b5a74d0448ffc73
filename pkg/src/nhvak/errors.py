"""Error hierarchy shared by all modules."""


class NhvakError(Exception):
    """Base class for all package errors."""


class ContractError(NhvakError):
    """A caller violated a documented precondition or a type invariant."""


class NumericalError(NhvakError):
    """A numerical operation failed (singular matrix, bad conditioning)."""


class RegularityError(NumericalError):
    """The reduced mass matrix is singular or too ill-conditioned to invert."""


class DivergenceError(NumericalError):
    """An integration produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
