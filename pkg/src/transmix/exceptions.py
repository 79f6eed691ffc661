"""Exception types shared across the package."""

__all__ = [
    "TransmixError",
    "ValidationError",
    "DegenerateKnotsError",
    "SaturatedResponseError",
    "RankDeficiencyError",
    "ExtrapolationError",
    "InitializationError",
    "UndefinedMetricError",
]


class TransmixError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TransmixError, ValueError):
    """Invalid argument values, shapes, or domains."""


class DegenerateKnotsError(ValidationError):
    """Too few distinct observations to place the requested knots."""


class SaturatedResponseError(ValidationError):
    """A response maps so close to the transform's range boundary that it
    is numerically indistinguishable from it."""


class RankDeficiencyError(ValidationError):
    """Covariate matrix is rank deficient on the rows that identify the
    regression coefficients."""


class ExtrapolationError(ValidationError):
    """A requested quantile lies outside the span of the evaluated curve."""


class InitializationError(TransmixError):
    """No finite starting point could be found for a sampler chain."""


class UndefinedMetricError(TransmixError):
    """A metric has no defined value on the given inputs (for example a
    concordance index with no comparable pairs)."""
