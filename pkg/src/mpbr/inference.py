"""Model-faithful simulation and bootstrap confidence intervals.

Random numbers come from numpy's PCG64 generator seeded through
``SeedSequence``. The bootstrap assigns replicate ``k`` the child stream
``SeedSequence(entropy=seed, spawn_key=(k,))``; redraws after a failed
replicate consume streams ``B, B+1, ...``. Results therefore do not depend
on evaluation order and are reproducible across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, InvalidSpecError, TooManyFailuresError
from .estimators import EstimatorSpec, fit
from .model import FitResult, MeasurementMatrix, pair_intercepts, pair_slopes

NOISE_FAMILIES = ("gaussian", "laplace", "student_t")
SIGMA_MODES = ("constant", "proportional")


@dataclass(frozen=True)
class SimSpec:
    """Synthetic data specification for the linear method-comparison model.

    Readings are ``x[i, mu] = beta[mu] * r[i] + alpha[mu] + eps[i, mu]``
    with ``eps[i, mu] = beta[mu] * sigma_i * eta[i, mu]`` and unit-variance
    noise ``eta``, so the scaled errors ``b[mu] * eps[i, mu]`` share one
    distribution across methods. ``sigma_i`` is either the constant
    ``sigma`` or ``sigma * r_i`` (heteroscedastic). A contaminated row has
    the designated column (default: the last method) multiplied by
    ``contamination_magnitude``.
    """

    beta: np.ndarray
    alpha: np.ndarray
    r_values: np.ndarray
    noise_family: str = "gaussian"
    student_df: float | None = None
    sigma: float = 0.0
    sigma_mode: str = "constant"
    contamination_fraction: float = 0.0
    contamination_magnitude: float = 100.0
    contamination_column: int | None = None
    method_names: tuple[str, ...] | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        r_values = np.asarray(self.r_values, dtype=float)
        if beta.ndim != 1 or beta.size < 2:
            raise InvalidSpecError("beta must be a 1-d vector of length >= 2")
        if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
            raise InvalidSpecError("beta components must be positive and finite")
        if alpha.shape != beta.shape or not np.all(np.isfinite(alpha)):
            raise InvalidSpecError("alpha must match beta in length and be finite")
        if r_values.ndim != 1 or r_values.size < 3 or not np.all(np.isfinite(r_values)):
            raise InvalidSpecError("r_values must be a finite 1-d vector of length >= 3")
        if self.noise_family not in NOISE_FAMILIES:
            raise InvalidSpecError(f"unknown noise family {self.noise_family!r}")
        if self.noise_family == "student_t":
            if self.student_df is None or self.student_df <= 2.0:
                raise InvalidSpecError("student_t noise needs student_df > 2 for a finite scale")
        if self.sigma < 0 or not np.isfinite(self.sigma):
            raise InvalidSpecError("sigma must be non-negative and finite")
        if self.sigma_mode not in SIGMA_MODES:
            raise InvalidSpecError(f"unknown sigma mode {self.sigma_mode!r}")
        if not 0.0 <= self.contamination_fraction < 0.5:
            raise InvalidSpecError("contamination_fraction must lie in [0, 0.5)")
        if self.contamination_column is not None and not (
            0 <= self.contamination_column < beta.size
        ):
            raise InvalidSpecError("contamination_column out of range")
        if self.method_names is not None and len(self.method_names) != beta.size:
            raise InvalidSpecError("method_names must match beta in length")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "r_values", r_values)

    @property
    def n_samples(self) -> int:
        return self.r_values.size

    @property
    def n_methods(self) -> int:
        return self.beta.size


def _unit_noise(rng: np.random.Generator, family: str, df: float | None, shape) -> np.ndarray:
    """Unit-variance noise draws for the supported families."""
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "laplace":
        return rng.laplace(scale=1.0 / math.sqrt(2.0), size=shape)
    return rng.standard_t(df, size=shape) * math.sqrt((df - 2.0) / df)


def simulate(spec: SimSpec, seed: int) -> MeasurementMatrix:
    """Draw one synthetic measurement matrix; deterministic given the seed.

    Draw order: one n-by-N unit-noise block, then (if contaminated) the row
    subset to contaminate.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n, n_methods = spec.n_samples, spec.n_methods
    eta = _unit_noise(rng, spec.noise_family, spec.student_df, (n, n_methods))
    if spec.sigma_mode == "proportional":
        sigma_i = spec.sigma * spec.r_values
    else:
        sigma_i = np.full(n, spec.sigma)
    values = (
        spec.beta[None, :] * spec.r_values[:, None]
        + spec.alpha[None, :]
        + eta * sigma_i[:, None] * spec.beta[None, :]
    )
    n_contaminated = int(round(spec.contamination_fraction * n))
    if n_contaminated > 0:
        rows = rng.choice(n, size=n_contaminated, replace=False)
        column = spec.contamination_column
        if column is None:
            column = n_methods - 1
        values[rows, column] *= spec.contamination_magnitude
    names = spec.method_names or tuple(f"m{k + 1}" for k in range(n_methods))
    ids = tuple(f"s{k + 1}" for k in range(n))
    return MeasurementMatrix(values, ids, names)


@dataclass(frozen=True)
class BootstrapConfig:
    """Row-resampling bootstrap settings."""

    replicates: int = 999
    seed: int = 0
    level: float = 0.95
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    max_retry_fraction: float = 0.05

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidSpecError("need at least 2 bootstrap replicates")
        if not 0.0 < self.level < 1.0:
            raise InvalidSpecError("level must lie strictly inside (0, 1)")
        if self.max_retry_fraction < 0:
            raise InvalidSpecError("max_retry_fraction must be non-negative")


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile intervals for all pairwise slopes and intercepts.

    Slope intervals are formed on the log scale (where these estimators are
    close to symmetric) and exponentiated back; the scaled intercepts a are
    reported as auxiliary output alongside the practitioner-facing pairwise
    intercepts.
    """

    point: FitResult
    method_names: tuple[str, ...]
    replicates: int
    level: float
    seed: int
    ln_slope_low: np.ndarray
    ln_slope_high: np.ndarray
    slope_low: np.ndarray
    slope_high: np.ndarray
    intercept_low: np.ndarray
    intercept_high: np.ndarray
    a_low: np.ndarray
    a_high: np.ndarray
    n_retries: int


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def bootstrap(data: MeasurementMatrix, config: BootstrapConfig | None = None) -> BootstrapResult:
    """Percentile bootstrap over row resamples of the measurement matrix.

    Resampling whole samples preserves the cross-method error structure.
    Replicates whose fit fails (degenerate resample, non-convergence) are
    redrawn from dedicated retry streams; at most
    ``floor(max_retry_fraction * replicates)`` redraws in total, after which
    :class:`TooManyFailuresError` is raised.
    """
    cfg = config or BootstrapConfig()
    point = fit(data, cfg.estimator)
    n = data.n_samples
    n_reps = cfg.replicates

    ln_slopes = np.empty((n_reps, point.n_methods, point.n_methods))
    intercepts = np.empty_like(ln_slopes)
    a_values = np.empty((n_reps, point.n_methods))

    retry_budget = int(math.floor(cfg.max_retry_fraction * n_reps))
    retries_used = 0
    for k in range(n_reps):
        stream = k
        while True:
            rng = _replicate_rng(cfg.seed, stream)
            rows = rng.integers(0, n, size=n)
            try:
                # Warm-start the resampled solve at the full-data estimate.
                replicate = fit(data.take_rows(rows), cfg.estimator, start=point.b)
            except EstimationError:
                if retries_used >= retry_budget:
                    raise TooManyFailuresError(
                        f"bootstrap retry budget ({retry_budget}) exhausted at replicate {k}"
                    ) from None
                stream = n_reps + retries_used
                retries_used += 1
                continue
            break
        ln_slopes[k] = np.log(pair_slopes(replicate.b))
        intercepts[k] = pair_intercepts(replicate.a, replicate.b)
        a_values[k] = replicate.a.a

    tail = 100.0 * (1.0 - cfg.level) / 2.0
    ln_lo, ln_hi = np.percentile(ln_slopes, [tail, 100.0 - tail], axis=0)
    int_lo, int_hi = np.percentile(intercepts, [tail, 100.0 - tail], axis=0)
    a_lo, a_hi = np.percentile(a_values, [tail, 100.0 - tail], axis=0)
    return BootstrapResult(
        point=point,
        method_names=data.method_names,
        replicates=n_reps,
        level=cfg.level,
        seed=cfg.seed,
        ln_slope_low=ln_lo,
        ln_slope_high=ln_hi,
        slope_low=np.exp(ln_lo),
        slope_high=np.exp(ln_hi),
        intercept_low=int_lo,
        intercept_high=int_hi,
        a_low=a_lo,
        a_high=a_hi,
        n_retries=retries_used,
    )
