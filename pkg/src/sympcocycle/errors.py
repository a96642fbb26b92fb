"""Exception types shared across the package."""


class SympcocycleError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(SympcocycleError, ValueError):
    """Matrix or form dimensions are inconsistent or non-positive."""


class TruncationError(SympcocycleError):
    """A shift-space window was exhausted by too many iterates."""


class ResourceLimitError(SympcocycleError):
    """Requested computation exceeds a hard resource guard."""


class SearchFailureError(SympcocycleError):
    """No admissible solution found in the searched lattice/grid."""


class StepTooLargeError(SympcocycleError, ValueError):
    """Integration step is too large for the generator norm."""


class NumericalDegeneracyError(SympcocycleError):
    """Rank collapse or underflow detected during orthogonalization."""


class SpectrumDegeneracyError(SympcocycleError):
    """Return map has complex or repeated eigenvalues where a real
    simple spectrum is required."""


class PreconditionError(SympcocycleError, ValueError):
    """A documented operation precondition does not hold."""


class GeometryError(SympcocycleError):
    """Flowbox geometry is inadmissible (self-intersection, overlap)."""


class BudgetError(SympcocycleError):
    """A perturbation exceeded its norm budget."""


class IsotopyError(SympcocycleError):
    """The linear isotopy degenerates (singular interpolant)."""


class ConfigError(SympcocycleError, ValueError):
    """Invalid run configuration; message aggregates every violation."""
