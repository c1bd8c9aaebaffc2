"""Exception types shared across the package."""


class QDCascadeError(Exception):
    """Base class for all package errors."""


class ParameterError(QDCascadeError, ValueError):
    """A physical parameter or argument is out of its valid range."""


class ConfigError(QDCascadeError, ValueError):
    """A configuration object or file failed validation.

    The message names the offending field.
    """


class FormatError(QDCascadeError, ValueError):
    """A data file or in-memory record violates its format contract."""


class AccuracyError(QDCascadeError, RuntimeError):
    """A numerical result cannot be trusted at the requested settings."""


class AnalysisError(QDCascadeError, RuntimeError):
    """An extraction step failed on the supplied data."""


class DegenerateNormalizationError(AnalysisError):
    """Side-peak normalization is zero or otherwise unusable."""


class PlateauSelectionError(AnalysisError):
    """No noise-boundary candidate produced a flat g2-vs-window curve.

    Carries the per-candidate diagnostics so the caller can inspect why.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class FitError(QDCascadeError, RuntimeError):
    """The optimizer failed to converge within the multi-start budget."""


class BootstrapError(QDCascadeError, RuntimeError):
    """Too many bootstrap resamples failed to refit."""
