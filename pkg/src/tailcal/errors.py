"""Exception types raised across the package."""

from __future__ import annotations


class TailcalError(Exception):
    """Base class for all package errors."""


class ParameterError(TailcalError, ValueError):
    """A distribution or scenario parameter is outside its domain."""


class DomainError(TailcalError, ValueError):
    """An argument (probability level, grid value, ...) is outside its domain."""


class SpecParseError(TailcalError, ValueError):
    """A distribution spec string (or dataset record) could not be parsed."""

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message)
        self.row = row


class MissingRandomizerError(TailcalError, ValueError):
    """An atomic forecast needs a uniform randomizer for its PIT."""


class DegenerateDenominatorError(TailcalError, ArithmeticError):
    """The summed forecast exceedance probability is (numerically) zero."""


class EmptyExceedanceError(TailcalError, ArithmeticError):
    """No observation exceeds the threshold."""


class InsufficientDataError(TailcalError, ValueError):
    """Too few observations for the requested statistic."""


class DegenerateNullError(TailcalError, ValueError):
    """The null distribution of a test is degenerate."""


class DivergentScoreError(TailcalError, ArithmeticError):
    """The expected score is infinite for this forecast."""


class DegeneratePredictorError(TailcalError, ValueError):
    """A regression predictor carries no information."""


class InitializationError(TailcalError, ValueError):
    """An optimizer could not evaluate its starting point."""


class DatasetError(SpecParseError):
    """A dataset file is malformed; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}", row=line)
        self.line = line
