"""Exception hierarchy shared by every module."""


class SysIdError(Exception):
    """Base class for all package errors."""


class DomainError(SysIdError, ValueError):
    """Input outside the mathematical domain of an operation."""


class UnstableModelError(DomainError):
    """Operation requires a Schur stable model."""


class ConfigError(SysIdError, ValueError):
    """Invalid or inconsistent configuration."""


class NumericalError(SysIdError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""
