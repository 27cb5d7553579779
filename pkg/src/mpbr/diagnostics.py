"""Post-fit analytics: agreement data, rank correlations, group effects,
unit-conversion factors and parameter exports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConstantColumnError,
    DimensionMismatchError,
    NoKnownFactorError,
    NonPositiveError,
    RankDeficientDesignError,
)
from .model import FitResult, MeasurementMatrix, MethodMeta, ScalingVector


@dataclass(frozen=True)
class BlandAltmanPoint:
    """One (sample, method) cell of the generalised agreement plot: the
    latent estimate on the abscissa and the scaled residual
    ``b[mu] x[i, mu] - r[i] - a[mu]`` on the ordinate."""

    sample_id: str
    method_name: str
    mean: float
    standardized_residual: float

    @property
    def residual_ratio(self) -> float:
        """Residual relative to the latent estimate (nan at mean zero);
        useful when the scatter grows with concentration."""
        if self.mean == 0.0:
            return math.nan
        return self.standardized_residual / self.mean


def bland_altman_data(data: MeasurementMatrix, fit: FitResult) -> list[BlandAltmanPoint]:
    """Agreement-plot data in (sample, method) order: n * N points.

    For estimators whose latent values are the per-sample mean of the
    scaled readings (mPBR, mRMR, PBR2), the residuals of each sample sum to
    zero across methods.
    """
    if fit.method_names != data.method_names or fit.n_samples != data.n_samples:
        raise DimensionMismatchError(
            "fit and data disagree in shape or method names; "
            f"fit is {fit.n_samples}x{fit.n_methods}, data is {data.n_samples}x{data.n_methods}"
        )
    points = []
    for i, sample_id in enumerate(data.sample_ids):
        for mu, method in enumerate(data.method_names):
            points.append(
                BlandAltmanPoint(
                    sample_id=sample_id,
                    method_name=method,
                    mean=float(fit.r_hat[i]),
                    standardized_residual=float(fit.residuals[i, mu]),
                )
            )
    return points


def _tau_b(x: np.ndarray, y: np.ndarray) -> float:
    """Tie-corrected Kendall tau by exact pair counting.

    O(n^2) time and memory, fine for method-comparison panel sizes; being
    integer-exact it returns +/-1.0 bit-exactly on monotone data.
    """
    sign_x = np.sign(x[:, None] - x[None, :])
    sign_y = np.sign(y[:, None] - y[None, :])
    upper = np.triu_indices(x.size, 1)
    sx = sign_x[upper]
    sy = sign_y[upper]
    net_concordant = float((sx * sy).sum())
    n_pairs = sx.size
    tied_x = float((sx == 0).sum())
    tied_y = float((sy == 0).sum())
    denom = math.sqrt((n_pairs - tied_x) * (n_pairs - tied_y))
    return net_concordant / denom


def kendall_matrix(data: MeasurementMatrix) -> np.ndarray:
    """Tie-corrected Kendall tau-b for every method pair (unit diagonal)."""
    values = data.values
    n_methods = data.n_methods
    for mu in range(n_methods):
        if np.ptp(values[:, mu]) == 0.0:
            raise ConstantColumnError(
                f"column {data.method_names[mu]!r} is constant; tau is undefined"
            )
    tau = np.eye(n_methods)
    for mu in range(n_methods):
        for nu in range(mu + 1, n_methods):
            t = _tau_b(values[:, mu], values[:, nu])
            tau[mu, nu] = tau[nu, mu] = t
    return tau


@dataclass(frozen=True)
class FactorEffect:
    """Effect of one non-reference factor level on the fitted parameters."""

    factor: str
    level: str
    log_slope_effect: float
    slope_ratio: float
    intercept_shift: float


@dataclass(frozen=True)
class GroupEffectResult:
    """Least-squares decomposition of the fitted parameters over method-level
    factors.

    ``slope_ratio = exp(q)`` from regressing -ln(b) on the dummy-coded
    factors is the average slope of the level against its reference level;
    ``intercept_shift`` comes from the same regression on a (no logarithm).
    """

    terms: tuple[FactorEffect, ...]
    design_columns: tuple[str, ...]
    slope_residual_rms: float
    intercept_residual_rms: float
    n_methods: int

    def effect(self, factor: str, level: str | None = None) -> FactorEffect:
        matches = [t for t in self.terms if t.factor == factor and level in (None, t.level)]
        if not matches:
            raise KeyError(f"no fitted effect for factor {factor!r}")
        if len(matches) > 1:
            raise KeyError(f"factor {factor!r} has several levels; pass level=")
        return matches[0]


def group_effects(fit: FitResult, meta: MethodMeta, factors: Sequence[str]) -> GroupEffectResult:
    """Regress the fitted parameters on method-level factors.

    Each factor is dummy-coded against its reference level (the
    lexicographically smallest); the design keeps an intercept column so
    unbalanced designs stay unbiased, but the intercept itself is not
    reported.
    """
    methods = fit.method_names
    n_methods = len(methods)
    if not factors:
        raise RankDeficientDesignError("no factors requested")

    columns = [np.ones(n_methods)]
    labels = ["intercept"]
    terms_key: list[tuple[str, str]] = []
    for factor in factors:
        method_levels = [meta.level(m, factor) for m in methods]
        levels = sorted(set(method_levels))
        if len(levels) < 2:
            raise RankDeficientDesignError(f"factor {factor!r} has a single level")
        for level in levels[1:]:
            columns.append(np.array([1.0 if lv == level else 0.0 for lv in method_levels]))
            labels.append(f"{factor}={level}")
            terms_key.append((factor, level))

    design = np.column_stack(columns)
    n_coef = design.shape[1]
    if n_methods < n_coef + 1:
        raise RankDeficientDesignError(
            f"{n_methods} methods cannot support {n_coef} coefficients"
        )
    if np.linalg.matrix_rank(design) < n_coef:
        raise RankDeficientDesignError("design matrix is rank deficient")

    neg_log_b = -np.log(fit.b.b)
    q, *_ = np.linalg.lstsq(design, neg_log_b, rcond=None)
    c, *_ = np.linalg.lstsq(design, fit.a.a, rcond=None)
    slope_rms = float(np.sqrt(np.mean((design @ q - neg_log_b) ** 2)))
    intercept_rms = float(np.sqrt(np.mean((design @ c - fit.a.a) ** 2)))

    terms = tuple(
        FactorEffect(
            factor=factor,
            level=level,
            log_slope_effect=float(q[j + 1]),
            slope_ratio=float(np.exp(q[j + 1])),
            intercept_shift=float(c[j + 1]),
        )
        for j, (factor, level) in enumerate(terms_key)
    )
    return GroupEffectResult(
        terms=terms,
        design_columns=tuple(labels),
        slope_residual_rms=slope_rms,
        intercept_residual_rms=intercept_rms,
        n_methods=n_methods,
    )


@dataclass(frozen=True)
class ConversionTable:
    """Unit-conversion factors on a common scale.

    ``mean_scale`` is the geometric mean of b[mu] / factor[mu] over the
    methods with a known factor; methods without one get the derived factor
    b[mu] / mean_scale.
    """

    mean_scale: float
    factors: dict[str, float]
    known_methods: tuple[str, ...]


def conversion_factors(
    b: ScalingVector,
    method_names: Sequence[str],
    known: Mapping[str, float],
) -> ConversionTable:
    """Fill in missing unit-conversion factors from the fitted scalings."""
    names = tuple(method_names)
    if len(names) != len(b):
        raise ValueError("method_names length does not match the scaling vector")
    unknown_keys = set(known) - set(names)
    if unknown_keys:
        raise KeyError(f"known factors for unknown methods: {sorted(unknown_keys)}")
    if not known:
        raise NoKnownFactorError("need at least one method with a known conversion factor")
    for name, factor in known.items():
        if not (factor > 0.0 and np.isfinite(factor)):
            raise NonPositiveError(f"conversion factor for {name!r} must be positive")

    b_by_name = dict(zip(names, b.b))
    log_ratios = [np.log(b_by_name[name] / known[name]) for name in names if name in known]
    mean_scale = float(np.exp(np.mean(log_ratios)))
    factors = {
        name: float(known[name]) if name in known else float(b_by_name[name] / mean_scale)
        for name in names
    }
    return ConversionTable(
        mean_scale=mean_scale,
        factors=factors,
        known_methods=tuple(name for name in names if name in known),
    )


def parameter_scatter(fit: FitResult) -> list[tuple[str, float, float]]:
    """Flat (method, b, a) export of the fitted parameters in method order."""
    return [
        (name, float(fit.b.b[mu]), float(fit.a.a[mu]))
        for mu, name in enumerate(fit.method_names)
    ]
