"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: validation problems exit 2,
data problems exit 3, and I/O failures exit 4.
"""

from __future__ import annotations


class MandateSimError(Exception):
    """Base class for everything raised deliberately by this package."""


class ValidationError(MandateSimError):
    """A parameter, config value, or flag is outside its documented domain."""


class DataError(MandateSimError):
    """An input dataset exists but cannot support the requested computation."""


class NoDataError(DataError):
    """A filter selected zero records."""


class GridGapError(DataError):
    """A computation needs grid cells that are absent from the dataset."""

    def __init__(self, message: str, missing: list[tuple] | None = None):
        super().__init__(message)
        self.missing = missing or []


class DatasetParseError(DataError):
    """A dataset or observation file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DegenerateDataError(DataError):
    """Observations cannot identify the model (single label, constant price)."""


class SeparationError(DataError):
    """A price threshold perfectly separates accepts from rejects."""

    def __init__(self, message: str, price: float | None = None):
        super().__init__(message)
        self.price = price
