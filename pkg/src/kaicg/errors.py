"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ValidationError(ValueError):
    """A configuration object violates one of its invariants."""


class DegenerateInputError(ArithmeticError):
    """The numerical problem is singular or otherwise degenerate."""


class UnsupportedConfigurationError(ValueError):
    """The requested combination of parameters is not supported."""
