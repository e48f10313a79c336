"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge; carries the residual if known."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MonotonicityError(NumericError):
    """A bracketing search found non-monotone endpoints and refuses to guess."""


class ConfigError(ValueError):
    """An experiment or run configuration is invalid."""
