"""Regression estimators for comparing N measurement methods at once.

Four estimators share one parameterisation (scaling vector b, scaled
intercepts a, latent values r):

* :func:`fit_mpbr` -- the robust multivariate Passing-Bablok generalisation:
  slopes from the spherical-median-axis estimating equation over all
  pairwise sample differences, intercepts from the spatial median of the
  projected scaled points. Reduces to classical Passing-Bablok for N = 2.
* :func:`fit_pbr2` -- classical two-method Passing-Bablok (shifted median of
  pairwise slopes); kept as the reference implementation the multivariate
  fit must agree with in 2-d.
* :func:`fit_mrmr` -- multivariate reduced major axis, the non-robust
  analogue obtained by dropping the unit normalisation of the summands.
* :func:`fit_mmar` -- multivariate major axis (Deming) regression via the
  principal eigenvector of the weighted scatter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllTiedError,
    DegenerateEigenError,
    DegenerateInputError,
    EstimationError,
    InsufficientDataError,
    InvalidSpecError,
    NonConvergenceError,
    OrientationError,
    SingularSystemError,
)
from .geometry import SolverConfig, solve_scaling, spatial_median
from .model import (
    FitResult,
    InterceptVector,
    MeasurementMatrix,
    ScalingVector,
    normalize_scaling,
)

ESTIMATOR_KINDS = ("mpbr", "mrmr", "mmar", "pbr2")
_TAGS = {"mpbr": "mPBR", "mrmr": "mRMR", "mmar": "mMAR", "pbr2": "PBR2"}


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and with what options.

    ``mmar_gamma`` is the diagonal of the method-variance-ratio matrix and
    ``mmar_weights`` are per-sample inverse variances; both are meaningful
    only for the major-axis estimator.
    """

    kind: str = "mpbr"
    with_intercept: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)
    mmar_gamma: np.ndarray | None = None
    mmar_weights: np.ndarray | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ESTIMATOR_KINDS:
            raise InvalidSpecError(f"unknown estimator kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        for name in ("mmar_gamma", "mmar_weights"):
            value = getattr(self, name)
            if value is None:
                continue
            if kind != "mmar":
                raise InvalidSpecError(f"{name} is only valid with kind='mmar'")
            arr = np.asarray(value, dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise InvalidSpecError(f"{name} must be a 1-d vector of positive reals")
            object.__setattr__(self, name, arr)

    @property
    def tag(self) -> str:
        return _TAGS[self.kind]


def _require_kind(spec: EstimatorSpec, kind: str) -> None:
    if spec.kind != kind:
        raise InvalidSpecError(f"spec.kind is {spec.kind!r}, expected {kind!r}")


def estimate_latent(data: MeasurementMatrix, b: ScalingVector) -> np.ndarray:
    """Latent value per sample: the mean of the scaled readings, x_i . b / N."""
    if len(b) != data.n_methods:
        raise ValueError("scaling length does not match the number of methods")
    return data.values @ b.b / data.n_methods


def estimate_intercepts(
    data: MeasurementMatrix,
    b: ScalingVector,
    config: SolverConfig | None = None,
) -> InterceptVector:
    """Robust scaled intercepts: the spatial median of the scaled readings
    projected onto the hyperplane orthogonal to the space diagonal.

    The projected points have zero component along the diagonal, so the
    zero-sum gauge holds automatically; it is asserted and then enforced
    exactly against floating-point drift.
    """
    if len(b) != data.n_methods:
        raise ValueError("scaling length does not match the number of methods")
    scaled = data.values * b.b
    projected = scaled - scaled.mean(axis=1, keepdims=True)
    median = spatial_median(projected, config)
    tol = 1e-8 * max(1.0, float(np.max(np.abs(median))))
    if abs(float(median.sum())) > tol:
        raise EstimationError("spatial median left the zero-sum hyperplane")
    return InterceptVector(median - median.mean())


def _finish(data, spec, b, a, iterations, residual) -> FitResult:
    r_hat = estimate_latent(data, b)
    residuals = data.values * b.b - r_hat[:, None] - a.a[None, :]
    return FitResult(
        b=b,
        a=a,
        r_hat=r_hat,
        residuals=residuals,
        estimator=spec.tag,
        converged=True,
        iterations=iterations,
        fixed_point_residual=residual,
        method_names=data.method_names,
    )


def fit_mpbr(
    data: MeasurementMatrix,
    spec: EstimatorSpec | None = None,
    start: ScalingVector | None = None,
) -> FitResult:
    """Robust multivariate Passing-Bablok fit.

    With intercepts, the scaling is solved on all n(n-1)/2 pairwise sample
    differences (which are translation-invariant), then the intercepts come
    from the spatial median of the projected scaled points. Without
    intercepts the same estimating equation runs on the raw sample points
    and a is fixed at zero. ``start`` seeds the solve (all ones by
    default); resampled refits converge faster from the full-data estimate.
    """
    spec = spec or EstimatorSpec(kind="mpbr")
    _require_kind(spec, "mpbr")
    values = data.values
    n = data.n_samples
    if spec.with_intercept:
        n_distinct = np.unique(values, axis=0).shape[0]
        if n_distinct < data.n_methods + 1:
            raise InsufficientDataError(
                f"with-intercept fit needs at least {data.n_methods + 1} distinct samples, "
                f"got {n_distinct}"
            )
        rows, cols = np.triu_indices(n, 1)
        vectors = values[cols] - values[rows]
    else:
        vectors = values
    solution = solve_scaling(vectors, spec.solver, start=start)
    if spec.with_intercept:
        a = estimate_intercepts(data, solution.b, spec.solver)
    else:
        a = InterceptVector.zeros(data.n_methods)
    return _finish(data, spec, solution.b, a, solution.iterations, solution.fixed_point_residual)


def fit_pbr2(x, y) -> tuple[float, float]:
    """Classical two-method Passing-Bablok regression.

    The slope is the shifted median of all pairwise slopes
    ``S = dy / dx``: pairs with dx = dy = 0 are undefined and skipped,
    vertical pairs count as +/- infinity by the sign of dy, slopes exactly
    equal to -1 are excluded, and the median index is offset by the number
    of slopes below -1. With an even count the two middle slopes are
    combined by their geometric mean (falling back to the arithmetic mean
    when they straddle zero), so swapping the two axes inverts the estimate
    exactly. The intercept is ``median(y - slope * x)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")

    rows, cols = np.triu_indices(x.size, 1)
    dx = x[cols] - x[rows]
    dy = y[cols] - y[rows]
    defined = (dx != 0.0) | (dy != 0.0)
    dx, dy = dx[defined], dy[defined]
    if dx.size == 0:
        raise AllTiedError("every sample pair is tied; no pairwise slope is defined")
    vertical = dx == 0.0
    slopes = np.empty(dx.size)
    slopes[~vertical] = dy[~vertical] / dx[~vertical]
    slopes[vertical] = np.where(dy[vertical] > 0, np.inf, -np.inf)
    slopes = slopes[slopes != -1.0]
    if slopes.size == 0:
        raise AllTiedError("all defined pairwise slopes equal -1")

    slopes.sort()
    offset = int(np.sum(slopes < -1.0))
    m = slopes.size
    if m % 2 == 1:
        idx = (m - 1) // 2 + offset
        if idx >= m:
            raise OrientationError("pairwise slopes are predominantly negative")
        slope = float(slopes[idx])
    else:
        hi = m // 2 + offset
        if hi >= m:
            raise OrientationError("pairwise slopes are predominantly negative")
        lo_val, hi_val = float(slopes[hi - 1]), float(slopes[hi])
        if lo_val > 0.0 and np.isfinite(hi_val):
            slope = float(np.sqrt(lo_val * hi_val))
        elif hi_val < 0.0:
            slope = -float(np.sqrt(lo_val * hi_val))
        else:
            slope = 0.5 * (lo_val + hi_val)
    if not np.isfinite(slope):
        raise DegenerateInputError("median pairwise slope is infinite (vertical data)")
    intercept = float(np.median(y - slope * x))
    return slope, intercept


def _fit_pbr2_result(data: MeasurementMatrix, spec: EstimatorSpec) -> FitResult:
    """Wrap the classical 2-d estimate in the common parameterisation."""
    if data.n_methods != 2:
        raise InvalidSpecError("pbr2 requires exactly 2 methods")
    if not spec.with_intercept:
        raise InvalidSpecError("pbr2 always fits an intercept")
    slope, intercept = fit_pbr2(data.values[:, 0], data.values[:, 1])
    if slope <= 0.0:
        raise OrientationError(f"pairwise slope estimate is not positive: {slope}")
    b = ScalingVector(np.array([1.0, 1.0 / slope]))
    a2 = 0.5 * intercept / slope  # intercept = (a2 - a1)/b2 with a1 = -a2
    a = InterceptVector(np.array([-a2, a2]))
    return _finish(data, spec, b, a, 0, 0.0)


def fit_mrmr(
    data: MeasurementMatrix,
    spec: EstimatorSpec | None = None,
    start: ScalingVector | None = None,
) -> FitResult:
    """Multivariate reduced major axis fit.

    Same reweighted linear iteration as the robust fit but with the raw
    (unnormalised, sign-carrying) summands, so large readings keep their
    full leverage. With intercepts the scaling is fitted on column-centred
    data and the intercepts are the classical mean-based ones; in 2-d the
    slope reduces to sd(y) / sd(x).
    """
    spec = spec or EstimatorSpec(kind="mrmr")
    _require_kind(spec, "mrmr")
    values = data.values
    n_methods = data.n_methods
    if np.any(np.ptp(values, axis=0) == 0.0):
        raise SingularSystemError("a constant column cannot be scaled")
    work = values - values.mean(axis=0) if spec.with_intercept else values

    cfg = spec.solver
    b = np.ones(n_methods) if start is None else np.array(start.b, dtype=float)
    proj = np.eye(n_methods) - np.full((n_methods, n_methods), 1.0 / n_methods)
    rhs = np.zeros(n_methods)
    rhs[0] = 1.0

    def rel_residual(b):
        scaled = work * b
        totals = scaled.sum(axis=1)
        centered = scaled - totals[:, None] / n_methods
        dist = np.linalg.norm(centered, axis=1)
        mag = np.linalg.norm(scaled, axis=1)
        use = dist > cfg.degeneracy_epsilon * mag
        if not np.any(use):
            return 0.0  # every scaled point sits on the diagonal: exact fit
        num = float(np.linalg.norm((totals[use, None] * centered[use]).sum(axis=0)))
        den = float((np.abs(totals[use]) * dist[use]).sum())
        return num / den if den > 0.0 else 0.0

    for iteration in range(1, cfg.max_iterations + 1):
        totals = (work * b).sum(axis=1)
        g = totals @ work
        system = proj @ np.diag(g)
        system[0, :] = 0.0
        system[0, 0] = 1.0
        try:
            b_new = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"reweighted system is singular: {exc}") from exc
        if not np.all(np.isfinite(b_new)) or b_new[0] == 0.0:
            raise SingularSystemError("reweighted system is numerically singular")
        b_new = b_new / b_new[0]
        change = float(np.linalg.norm(b_new - b) / np.linalg.norm(b))
        b = b_new
        if change < cfg.rel_tolerance and rel_residual(b) <= cfg.fixed_point_tolerance:
            break
    else:
        raise NonConvergenceError(
            f"reduced-major-axis iteration did not converge within {cfg.max_iterations} iterations"
        )
    if np.any(b <= 0.0):
        raise OrientationError(f"converged scaling has non-positive components: {b.tolist()}")

    scaling = ScalingVector(b)
    if spec.with_intercept:
        a_raw = b * values.mean(axis=0) - float(values.mean(axis=0) @ b) / n_methods
        a = InterceptVector(a_raw - a_raw.mean())
    else:
        a = InterceptVector.zeros(n_methods)
    return _finish(data, spec, scaling, a, iteration, rel_residual(b))


def fit_mmar(data: MeasurementMatrix, spec: EstimatorSpec | None = None) -> FitResult:
    """Multivariate major axis (Deming) fit by principal component.

    The readings are scaled by the inverse square root of the
    variance-ratio diagonal, optionally column-centred (weighted means),
    and the slope direction is the leading eigenvector of the weighted
    scatter. Latent values use the generalised projection
    ``r_i = beta' G^-1 x_i / (beta' G^-1 beta)``.
    """
    spec = spec or EstimatorSpec(kind="mmar")
    _require_kind(spec, "mmar")
    values = data.values
    n, n_methods = values.shape

    gamma = spec.mmar_gamma if spec.mmar_gamma is not None else np.ones(n_methods)
    if gamma.size != n_methods:
        raise InvalidSpecError("mmar_gamma length must equal the number of methods")
    weights = spec.mmar_weights if spec.mmar_weights is not None else np.ones(n)
    if weights.size != n:
        raise InvalidSpecError("mmar_weights length must equal the number of samples")

    inv_root = 1.0 / np.sqrt(gamma)
    scaled = values * inv_root
    if spec.with_intercept:
        center = (weights[:, None] * scaled).sum(axis=0) / weights.sum()
        work = scaled - center
    else:
        work = scaled
    scatter = (weights[:, None] * work).T @ work

    eigvals, eigvecs = np.linalg.eigh(scatter)
    top, second = float(eigvals[-1]), float(eigvals[-2])
    if top <= 0.0 or (top - second) < 1e-10 * top:
        raise DegenerateEigenError(
            f"leading eigenvalue is not simple (top={top!r}, second={second!r})"
        )
    axis = eigvecs[:, -1]
    beta_dir = np.sqrt(gamma) * axis  # slope direction: beta proportional to G^(1/2) s
    if np.any(beta_dir == 0.0):
        raise OrientationError("principal axis is orthogonal to a method axis")
    scaling = normalize_scaling(1.0 / beta_dir)

    beta = scaling.beta
    gen_inv = beta / gamma
    denom = float(beta @ gen_inv)
    if spec.with_intercept:
        col_means = (weights[:, None] * values).sum(axis=0) / weights.sum()
        latent_shift = float(col_means @ scaling.b) / n_methods
        r_hat = (values - col_means) @ gen_inv / denom + latent_shift
        a_raw = scaling.b * col_means - latent_shift
        a = InterceptVector(a_raw - a_raw.mean())
    else:
        r_hat = values @ gen_inv / denom
        a = InterceptVector.zeros(n_methods)

    # Eigen-equation residual, relative: |(I - s s') S s| / |S s|.
    pulled = scatter @ axis
    resid = float(np.linalg.norm(pulled - axis * (axis @ pulled)) / np.linalg.norm(pulled))
    residuals = values * scaling.b - r_hat[:, None] - a.a[None, :]
    return FitResult(
        b=scaling,
        a=a,
        r_hat=r_hat,
        residuals=residuals,
        estimator=spec.tag,
        converged=True,
        iterations=0,
        fixed_point_residual=resid,
        method_names=data.method_names,
    )


def fit(
    data: MeasurementMatrix,
    spec: EstimatorSpec | None = None,
    start: ScalingVector | None = None,
) -> FitResult:
    """Dispatch to the estimator named by ``spec.kind``.

    ``start`` seeds the iterative estimators and is ignored by the direct
    ones (major axis, classical two-method).
    """
    spec = spec or EstimatorSpec()
    if spec.kind == "mpbr":
        return fit_mpbr(data, spec, start=start)
    if spec.kind == "mrmr":
        return fit_mrmr(data, spec, start=start)
    if spec.kind == "mmar":
        return fit_mmar(data, spec)
    return _fit_pbr2_result(data, spec)
