"""Multivariate Passing-Bablok regression for method-comparison studies.

Compare N measurement methods at once under the errors-in-variables model
``x[i, mu] = beta[mu] * r[i] + alpha[mu] + noise``: a robust
spherical-median-axis estimator for the slopes, classical Passing-Bablok,
reduced-major-axis and major-axis (Deming) companions, agreement and
group-effect diagnostics, and a percentile bootstrap.
"""

from .diagnostics import (
    BlandAltmanPoint,
    ConversionTable,
    FactorEffect,
    GroupEffectResult,
    bland_altman_data,
    conversion_factors,
    group_effects,
    kendall_matrix,
    parameter_scatter,
)
from .errors import (
    AllTiedError,
    ConstantColumnError,
    DataError,
    DegenerateEigenError,
    DegenerateInputError,
    DimensionMismatchError,
    EstimationError,
    InsufficientDataError,
    InvalidSpecError,
    MethodComparisonError,
    MixedSignError,
    NoKnownFactorError,
    NonConvergenceError,
    NonPositiveError,
    OrientationError,
    RankDeficientDesignError,
    SingularSystemError,
    TooManyFailuresError,
    ZeroPivotError,
    ZeroVectorError,
)
from .estimators import (
    EstimatorSpec,
    estimate_intercepts,
    estimate_latent,
    fit,
    fit_mmar,
    fit_mpbr,
    fit_mrmr,
    fit_pbr2,
)
from .geometry import (
    DirectionVector,
    ScalingSolution,
    SolverConfig,
    median_axis,
    solve_scaling,
    spatial_median,
    spherical_objective,
)
from .inference import BootstrapConfig, BootstrapResult, SimSpec, bootstrap, simulate
from .model import (
    FitResult,
    InterceptVector,
    MeasurementMatrix,
    MethodMeta,
    PairTable,
    ScalingVector,
    build_pair_table,
    normalize_scaling,
    pair_intercepts,
    pair_slopes,
    pair_table_from_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AllTiedError",
    "BlandAltmanPoint",
    "BootstrapConfig",
    "BootstrapResult",
    "ConstantColumnError",
    "ConversionTable",
    "DataError",
    "DegenerateEigenError",
    "DegenerateInputError",
    "DimensionMismatchError",
    "DirectionVector",
    "EstimationError",
    "EstimatorSpec",
    "FactorEffect",
    "FitResult",
    "GroupEffectResult",
    "InsufficientDataError",
    "InterceptVector",
    "InvalidSpecError",
    "MeasurementMatrix",
    "MethodComparisonError",
    "MethodMeta",
    "MixedSignError",
    "NoKnownFactorError",
    "NonConvergenceError",
    "NonPositiveError",
    "OrientationError",
    "PairTable",
    "RankDeficientDesignError",
    "ScalingSolution",
    "ScalingVector",
    "SimSpec",
    "SingularSystemError",
    "SolverConfig",
    "TooManyFailuresError",
    "ZeroPivotError",
    "ZeroVectorError",
    "bland_altman_data",
    "bootstrap",
    "build_pair_table",
    "conversion_factors",
    "estimate_intercepts",
    "estimate_latent",
    "fit",
    "fit_mmar",
    "fit_mpbr",
    "fit_mrmr",
    "fit_pbr2",
    "group_effects",
    "kendall_matrix",
    "median_axis",
    "normalize_scaling",
    "pair_intercepts",
    "pair_slopes",
    "pair_table_from_fit",
    "parameter_scatter",
    "simulate",
    "solve_scaling",
    "spatial_median",
    "spherical_objective",
]
