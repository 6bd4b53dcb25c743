"""Exception types shared across the package."""


class IsdError(Exception):
    """Base class for all errors raised by this package."""


class DataError(IsdError):
    """Invalid input data or configuration (bad CSV, bad window geometry, ...)."""


class NumericalError(IsdError):
    """Numerical failure (singular Gram matrix, non-PD covariance, ...)."""
