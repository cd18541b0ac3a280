"""Exception hierarchy shared across the package."""


class SfcastError(Exception):
    """Base class for all sfcast errors."""


class InvalidPeriodError(SfcastError):
    pass


class EmptyInputError(SfcastError):
    pass


class SeriesNotFoundError(SfcastError):
    pass


class DegenerateSeriesError(SfcastError):
    """Raised when a series has zero variance and cannot be standardized."""


class InsufficientCorpusError(SfcastError):
    pass


class MetadataMissingError(SfcastError):
    pass


class InvalidBasisError(SfcastError):
    pass


class ShapeError(SfcastError):
    pass


class NoObservationsError(SfcastError):
    pass


class DivergenceError(SfcastError):
    """Training loss became non-finite or exceeded the abort threshold."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnderdeterminedError(SfcastError):
    pass


class NoEvaluableEntriesError(SfcastError):
    pass


class InvalidGridError(SfcastError):
    pass


class ContainerFormatError(SfcastError):
    pass
