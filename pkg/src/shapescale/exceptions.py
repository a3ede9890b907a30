"""Exception types, each mapped to a CLI exit code."""


class ShapeScaleError(Exception):
    exit_code = 1


class DataError(ShapeScaleError, ValueError):
    """Malformed or degenerate input data."""

    exit_code = 2


class NumericalError(ShapeScaleError, ArithmeticError):
    """A computation could not produce a finite, well-defined result."""

    exit_code = 3
