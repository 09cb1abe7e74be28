"""Exception types shared across the package."""


class DataError(Exception):
    """Input data is malformed, inconsistent, or unusable."""


class SchemaError(DataError):
    """A required file, column, or field is missing or misnamed."""


class DegenerateInputError(DataError):
    """Input is syntactically fine but has no usable signal (all zeros, constant)."""


class InsufficientDataError(DataError):
    """Too few usable samples to carry out an estimation."""


class NumericalError(Exception):
    """A numerical routine failed to produce a finite, usable result."""
