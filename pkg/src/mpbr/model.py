"""Domain types for the linear method-comparison model.

Each of ``n`` samples is measured by ``N`` methods, and the readings are
assumed to follow ``x[i, mu] = beta[mu] * r[i] + alpha[mu] + noise`` with a
latent concentration ``r[i]`` per sample. Estimation works on the inverse
slopes ``b[mu] = 1 / beta[mu]`` (the scaling vector): multiplying method
``mu``'s column by ``b[mu]`` places all methods on one common scale. Gauge
freedom is fixed by ``b[0] = 1`` (the first method is the reference) and by
``sum(a) = 0`` for the scaled intercepts ``a[mu] = b[mu] * alpha[mu]``.

All types are immutable value objects; arrays are defensively copied and
marked read-only, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import MixedSignError, ZeroPivotError

FIT_TAGS = ("mPBR", "mRMR", "mMAR", "PBR2")


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MeasurementMatrix:
    """Raw readings: an n-by-N matrix with sample ids and method names.

    Rows with missing or non-numeric cells must be dropped before
    construction; the matrix itself is always complete and finite.
    """

    values: np.ndarray
    sample_ids: tuple[str, ...]
    method_names: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        n, n_methods = values.shape
        if n < 3:
            raise ValueError(f"need at least 3 samples, got {n}")
        if n_methods < 2:
            raise ValueError(f"need at least 2 methods, got {n_methods}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite (no NaN/inf entries)")
        ids = tuple(str(s) for s in self.sample_ids)
        names = tuple(str(s) for s in self.method_names)
        if len(ids) != n:
            raise ValueError("sample_ids length does not match row count")
        if len(names) != n_methods:
            raise ValueError("method_names length does not match column count")
        if len(set(names)) != n_methods:
            raise ValueError("method names must be unique")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "method_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_methods(self) -> int:
        return self.values.shape[1]

    def method_index(self, name: str) -> int:
        try:
            return self.method_names.index(name)
        except ValueError:
            raise KeyError(f"unknown method {name!r}") from None

    def take_rows(self, indices) -> "MeasurementMatrix":
        """Row subset/resample (duplicates allowed), e.g. for bootstrapping."""
        idx = np.asarray(indices, dtype=int)
        return MeasurementMatrix(
            self.values[idx],
            tuple(self.sample_ids[i] for i in idx),
            self.method_names,
        )

    def reorder_methods(self, order) -> "MeasurementMatrix":
        """Permute columns; `order` holds method names or column indices."""
        idx = [o if isinstance(o, (int, np.integer)) else self.method_index(o) for o in order]
        if sorted(idx) != list(range(self.n_methods)):
            raise ValueError("order must be a permutation of all methods")
        return MeasurementMatrix(
            self.values[:, idx],
            self.sample_ids,
            tuple(self.method_names[i] for i in idx),
        )


@dataclass(frozen=True)
class ScalingVector:
    """Inverse slopes b with the gauge b[0] = 1; all components positive."""

    b: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("b must be a 1-d vector of length >= 2")
        if not np.all(np.isfinite(b)):
            raise ValueError("b must be finite")
        if b[0] != 1.0:
            raise ValueError(f"gauge violated: b[0] = {b[0]!r}, expected exactly 1")
        if np.any(b <= 0.0):
            raise ValueError("all scaling components must be positive")
        b.flags.writeable = False
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return self.b.size

    @property
    def beta(self) -> np.ndarray:
        """Slopes relative to the reference method (reciprocal of b)."""
        return 1.0 / self.b


@dataclass(frozen=True)
class InterceptVector:
    """Scaled intercepts a = b * alpha, constrained to sum(a) = 0."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("a must be a 1-d vector of length >= 2")
        if not np.all(np.isfinite(a)):
            raise ValueError("a must be finite")
        tol = 1e-12 * max(float(np.max(np.abs(a))), 1.0)
        if abs(float(a.sum())) > tol:
            raise ValueError(f"sum(a) = {a.sum()!r} violates the zero-sum gauge")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    def __len__(self) -> int:
        return self.a.size

    @classmethod
    def zeros(cls, n_methods: int) -> "InterceptVector":
        return cls(np.zeros(n_methods))


@dataclass(frozen=True)
class FitResult:
    """Fitted scaling, intercepts, latent values and residuals.

    ``residuals[i, mu] = b[mu] * x[i, mu] - r_hat[i] - a[mu]`` on the common
    scale. ``fixed_point_residual`` is the norm of the estimating equation at
    the solution; for the mRMR/mMAR estimators it is normalised by the summed
    term magnitudes so the convergence tolerance is scale free.
    """

    b: ScalingVector
    a: InterceptVector
    r_hat: np.ndarray
    residuals: np.ndarray
    estimator: str
    converged: bool
    iterations: int
    fixed_point_residual: float
    method_names: tuple[str, ...]

    def __post_init__(self):
        if self.estimator not in FIT_TAGS:
            raise ValueError(f"unknown estimator tag {self.estimator!r}")
        n_methods = len(self.b)
        if len(self.a) != n_methods or len(self.method_names) != n_methods:
            raise ValueError("b, a and method_names must agree in length")
        r_hat = _frozen_array(self.r_hat)
        residuals = _frozen_array(self.residuals)
        if residuals.shape != (r_hat.size, n_methods):
            raise ValueError("residuals must be n_samples x n_methods")
        object.__setattr__(self, "r_hat", r_hat)
        object.__setattr__(self, "residuals", residuals)
        object.__setattr__(self, "method_names", tuple(self.method_names))

    @property
    def n_methods(self) -> int:
        return len(self.b)

    @property
    def n_samples(self) -> int:
        return self.r_hat.size


def normalize_scaling(raw) -> ScalingVector:
    """Normalise a raw inverse-slope candidate to the gauge b[0] = 1.

    A global sign flip is absorbed (the candidate is an axis, not a vector),
    but mixed signs mean the data cannot be oriented with all-positive slopes
    and raise :class:`MixedSignError`.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size < 2:
        raise ValueError("raw must be a 1-d vector of length >= 2")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw must be finite")
    if raw[0] == 0.0:
        raise ZeroPivotError("reference component is zero; cannot fix the gauge")
    if np.any(raw == 0.0) or (np.any(raw > 0) and np.any(raw < 0)):
        raise MixedSignError("scaling components differ in sign; slopes must share one orientation")
    return ScalingVector(raw / raw[0])


def pair_slopes(b: ScalingVector) -> np.ndarray:
    """All pairwise slopes: slopes[mu, nu] = b[mu] / b[nu].

    Entry (mu, nu) is the slope of method nu plotted against method mu. The
    table is compatible by construction: slopes[mu, nu] * slopes[nu, kappa]
    equals slopes[mu, kappa].
    """
    return b.b[:, None] / b.b[None, :]


def pair_intercepts(a: InterceptVector, b: ScalingVector) -> np.ndarray:
    """All pairwise intercepts: intercepts[mu, nu] = (a[nu] - a[mu]) / b[nu]."""
    if len(a) != len(b):
        raise ValueError("a and b must have equal length")
    return (a.a[None, :] - a.a[:, None]) / b.b[None, :]


@dataclass(frozen=True)
class PairTable:
    """Derived view of all pairwise slopes and intercepts.

    Never estimated independently: built from one (b, a) pair, so the
    compatibility identity between any three methods holds structurally.
    """

    slopes: np.ndarray
    intercepts: np.ndarray
    method_names: tuple[str, ...]

    def __post_init__(self):
        slopes = _frozen_array(self.slopes)
        intercepts = _frozen_array(self.intercepts)
        n = len(self.method_names)
        if slopes.shape != (n, n) or intercepts.shape != (n, n):
            raise ValueError("pair tables must be square and match method_names")
        if not np.allclose(np.diag(slopes), 1.0, rtol=0, atol=1e-12):
            raise ValueError("slope table diagonal must be 1")
        if not np.allclose(np.diag(intercepts), 0.0, rtol=0, atol=1e-12):
            raise ValueError("intercept table diagonal must be 0")
        compat = slopes[:, :, None] * slopes[None, :, :]  # [mu, nu, kappa]
        if not np.allclose(compat, slopes[:, None, :], rtol=1e-12, atol=0):
            raise ValueError("slope table violates the compatibility identity")
        if not np.allclose(slopes * slopes.T, 1.0, rtol=1e-12, atol=0):
            raise ValueError("slope table violates reciprocity")
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "method_names", tuple(self.method_names))


def build_pair_table(b: ScalingVector, a: InterceptVector, method_names) -> PairTable:
    return PairTable(pair_slopes(b), pair_intercepts(a, b), tuple(method_names))


def pair_table_from_fit(fit: FitResult) -> PairTable:
    return build_pair_table(fit.b, fit.a, fit.method_names)


@dataclass(frozen=True)
class MethodMeta:
    """Per-method factor levels, e.g. {"assay_B": {"prep": "B", "inst": "X"}}."""

    levels: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        fixed = {
            str(method): {str(k): str(v) for k, v in factors.items()}
            for method, factors in self.levels.items()
        }
        object.__setattr__(self, "levels", fixed)

    def level(self, method: str, factor: str) -> str:
        try:
            return self.levels[method][factor]
        except KeyError:
            raise KeyError(f"no {factor!r} level recorded for method {method!r}") from None
