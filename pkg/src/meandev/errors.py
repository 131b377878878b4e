"""Exception hierarchy shared across the package."""


class MeanDevError(Exception):
    """Base class for all package errors."""


class DomainError(MeanDevError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnboundedError(DomainError):
    """A quantity is infinite where a finite value is required."""


class NumericError(MeanDevError, ArithmeticError):
    """A numerical routine could not reach its tolerance; message carries a diagnostic."""


class SolverError(MeanDevError, RuntimeError):
    """An optimizer failed to converge; message carries the iteration trace."""


class ConfigError(MeanDevError, ValueError):
    """A configuration file is malformed or violates a component invariant."""


class InconclusiveError(MeanDevError, RuntimeError):
    """A statistical check could not decide because its precondition failed."""
