"""Exception types shared across the package."""


class NeutrexError(Exception):
    """Base class for all package errors."""


class ValidationError(NeutrexError):
    """Input data or configuration failed validation (CLI exit code 1)."""


class DegenerateCurveError(ValidationError):
    """An evaluation curve became undefined, e.g. no mated comparisons survive a discard step."""
