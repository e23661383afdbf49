"""Exception types shared across the package.

The CLI maps DataError/ConfigError to exit code 2 (bad input) and every
other DcrError to exit code 1 (internal or numerical failure).
"""


class DcrError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(DcrError):
    """Operand shapes do not conform to an operation's algebra."""


class DomainError(DcrError):
    """A value lies outside an operation's mathematical domain (e.g. log of 0)."""


class DataError(DcrError):
    """Invalid dataset, batch, or file input."""


class ConfigError(DcrError):
    """Invalid configuration or flag combination."""


class NumericalError(DcrError):
    """Training produced a non-finite loss or gradient."""


class MetricError(DcrError):
    """A metric is undefined on the given inputs (ties, zero variance, ...)."""
