"""Exception types shared across the package."""


class NemiError(Exception):
    """Base class for package errors."""


class FormatError(NemiError, ValueError):
    """Input file does not follow the expected column layout or value types."""

    def __init__(self, message, column=None, row=None):
        self.column = column
        self.row = row
        super().__init__(message)


class DegenerateError(NemiError, ArithmeticError):
    """A score or fit is undefined for the given input (zero dispersion, coincident centroids, ...)."""
