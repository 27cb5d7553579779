"""Exception types raised across the package.

Two broad families matter to callers: :class:`DataError` marks invalid or
inconsistent inputs (the CLI maps these to exit code 2), while
:class:`EstimationError` marks numerical or statistical failures during a
fit (exit code 3).
"""


class MethodComparisonError(Exception):
    """Base class for all errors raised by this package."""


class DataError(MethodComparisonError):
    """Invalid or inconsistent input data or configuration."""


class EstimationError(MethodComparisonError):
    """Numerical or statistical failure during estimation."""


class MixedSignError(EstimationError):
    """Candidate scaling components differ in sign; slopes must be positive."""


class ZeroPivotError(EstimationError):
    """The reference component of a scaling candidate is zero."""


class ZeroVectorError(EstimationError):
    """A zero-length point cannot be projected onto the unit sphere."""


class NonConvergenceError(EstimationError):
    """Iteration cap reached before the fixed-point criteria were met."""


class DegenerateInputError(EstimationError):
    """Input configuration admits no meaningful solve (e.g. no points)."""


class SingularSystemError(EstimationError):
    """The reweighted linear system is rank deficient beyond its gauge."""


class OrientationError(EstimationError):
    """A converged scaling has a non-positive component."""


class InsufficientDataError(EstimationError):
    """Too few (distinct) samples for the requested estimator."""


class AllTiedError(EstimationError):
    """Every pairwise slope is undefined (all sample pairs tied)."""


class DegenerateEigenError(EstimationError):
    """The leading eigenvalue of the scatter matrix is not simple."""


class ConstantColumnError(EstimationError):
    """Kendall's tau is undefined for a constant column."""


class RankDeficientDesignError(EstimationError):
    """The group-effect design matrix does not have full column rank."""


class DimensionMismatchError(DataError):
    """Fit results and data disagree in shape or method names."""


class NoKnownFactorError(DataError):
    """Conversion factors require at least one method with a known factor."""


class NonPositiveError(DataError):
    """Conversion factors and scalings must be strictly positive."""


class TooManyFailuresError(EstimationError):
    """Bootstrap retry budget exhausted by non-convergent replicates."""


class InvalidSpecError(DataError):
    """A simulation or estimator specification is internally inconsistent."""
