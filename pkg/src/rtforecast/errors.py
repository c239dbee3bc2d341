"""Exception types shared across the package."""


class ForecastError(Exception):
    """Base class for all package errors."""


class DimensionError(ForecastError, ValueError):
    pass


class NonFiniteError(ForecastError, ValueError):
    pass


class SingularSystemError(ForecastError):
    """Raised when a system expected to be SPD fails to factor."""


class DivergenceError(ForecastError):
    """Non-finite value produced during a forward or backward pass."""


class DegenerateLabelError(ForecastError, ValueError):
    pass


class DegenerateRegressionError(ForecastError):
    pass


class DegenerateScaleError(ForecastError, ValueError):
    pass


class InsufficientDataError(ForecastError, ValueError):
    pass


class ConfigError(ForecastError, ValueError):
    """Invalid configuration. ``problems`` lists every issue found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(ForecastError, ValueError):
    """Unreadable or invalid input data."""
