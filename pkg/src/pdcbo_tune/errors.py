"""Exception hierarchy shared by all modules."""


class PdcboError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(PdcboError, ValueError):
    """An input vector has the wrong dimension."""


class FactorizationError(PdcboError, ArithmeticError):
    """The regularized Gram matrix could not be factorized."""


class ConfigError(PdcboError, ValueError):
    """Invalid configuration value."""


class DomainError(PdcboError, ValueError):
    """A value is outside the domain of an operation (e.g. empty input)."""


class SimulationDiverged(PdcboError, ArithmeticError):
    """The room simulation produced a non-finite state."""


class SchemaError(PdcboError, ValueError):
    """A weather CSV has missing or unexpected columns."""


class WeatherParseError(PdcboError, ValueError):
    """A weather CSV cell could not be parsed or failed validation."""


class EmptyInputError(PdcboError, ValueError):
    """A file contained no data rows."""


class ExperimentError(PdcboError, RuntimeError):
    """A day of an experiment failed; carries the failing day index."""

    def __init__(self, day, cause):
        super().__init__(f"day {day}: {cause}")
        self.day = day
        self.cause = cause
