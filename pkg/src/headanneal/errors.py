"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so raise the most specific
type that applies.
"""


class HeadAnnealError(Exception):
    """Base class for all package errors."""


class ParseError(HeadAnnealError):
    """An input file could not be parsed (malformed row, bad field, ...)."""


class ConfigurationError(HeadAnnealError):
    """Settings are inconsistent or infeasible (bounds, fractions, widths)."""


class NeighborhoodError(ConfigurationError):
    """The restricted neighborhood of a state is empty."""


class DataError(HeadAnnealError):
    """Input data is structurally valid but unusable (empty subgroup, ...)."""


class DegenerateDataError(DataError):
    """Preprocessing would destroy all signal in the data."""


class ValidationError(DataError):
    """A value violates its documented range or invariant."""


class DimensionError(ValidationError):
    """Two objects that must share a width or length do not."""


class TrainingDivergenceError(HeadAnnealError):
    """Training produced a non-finite loss."""
