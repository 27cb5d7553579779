"""Optimisation core: spherical median axis, spatial median, scaling solver.

All three solvers are Weiszfeld-style iterative reweightings of an
estimating equation whose summands are unit vectors, so every data point has
bounded influence. Two non-smooth situations need care:

* an iterate may coincide with a data point (spatial median) or a data-point
  axis (median axis / scaling solve). There the estimating equation is
  undefined, but the point can still be the optimum; we then certify
  optimality with the subgradient condition ``norm(rest of the terms) <=
  number of coinciding terms`` (the modified Weiszfeld step of Vardi and
  Zhang), and report ``max(0, norm - count)`` as the fixed-point residual;
* individual terms whose denominator underflows the degeneracy threshold
  are dropped from the sums, mirroring the exclusion of undefined pairwise
  slopes in the classical two-method estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    NonConvergenceError,
    OrientationError,
    SingularSystemError,
    ZeroVectorError,
)
from .model import ScalingVector

# Relative width of the coincidence window in which an iterate is considered
# to sit on a data point / data axis. Wider than the term-drop threshold so
# the optimality certificate can fire before the iteration limit-cycles
# around the kink.
_COINCIDENCE_WINDOW = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules shared by the iterative solvers.

    Parameters
    ----------
    max_iterations
        Hard cap on reweighting steps before :class:`NonConvergenceError`.
    rel_tolerance
        Convergence threshold on the relative change of the iterate.
    fixed_point_tolerance
        Threshold on the norm of the estimating equation at the iterate.
    degeneracy_epsilon
        Relative scale below which a single term is dropped from the sums.
    """

    max_iterations: int = 500
    rel_tolerance: float = 1e-10
    fixed_point_tolerance: float = 1e-8
    degeneracy_epsilon: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("rel_tolerance", "fixed_point_tolerance", "degeneracy_epsilon"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DirectionVector:
    """A unit vector representing an axis through the origin (s and -s are
    the same axis)."""

    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("s must be a 1-d vector of length >= 2")
        norm = float(np.linalg.norm(s))
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-14:
            raise ValueError(f"s must have unit norm, got {norm!r}")
        s.flags.writeable = False
        object.__setattr__(self, "s", s)

    @classmethod
    def from_vector(cls, v) -> "DirectionVector":
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0 or not np.isfinite(norm):
            raise ZeroVectorError("cannot normalise a zero or non-finite vector")
        return cls(v / norm)


@dataclass(frozen=True)
class ScalingSolution:
    """A converged scaling vector plus solver metadata."""

    b: ScalingVector
    iterations: int
    fixed_point_residual: float
    converged: bool


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 2:
        raise DegenerateInputError("need an m x N array of points with m >= 1, N >= 2")
    return pts


def _as_axis(axis) -> np.ndarray:
    if isinstance(axis, DirectionVector):
        return axis.s
    return DirectionVector.from_vector(axis).s


def spherical_objective(points, axis) -> float:
    """Summed angular distance between an axis and points projected on the
    unit sphere.

    Each point contributes ``arccos(|s . x / |x||)``, the angle between the
    axis and the point's direction folded into [0, pi/2], so the total lies
    in [0, m * pi/2] for m points.
    """
    pts = _as_points(points)
    s = _as_axis(axis)
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVectorError("points must have nonzero length")
    cosines = np.abs(pts @ s) / norms
    return float(np.arccos(np.clip(cosines, -1.0, 1.0)).sum())


def _axis_state(pts, norms, s, window):
    """Tangent residual of the axis estimating equation at s.

    Returns (residual_vector_excluding_near_terms, n_near) where "near"
    means within the coincidence window of the axis.
    """
    t = pts @ s
    tang = pts - np.outer(t, s)
    dist = np.linalg.norm(tang, axis=1)
    near = dist <= window * norms
    use = ~near & (t != 0.0)
    if not np.any(use):
        return np.zeros(pts.shape[1]), int(near.sum())
    resid = (np.sign(t[use])[:, None] * tang[use] / dist[use, None]).sum(axis=0)
    return resid, int(near.sum())


def _fix_axis_sign(s: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(s)))
    return s if s[k] > 0 else -s


def median_axis(points, config: SolverConfig | None = None) -> DirectionVector:
    """Spherical median axis: the axis minimising the summed angular
    distance to all points projected onto the unit sphere.

    Solved by iterative reweighting: with tangent distances
    ``d_i = |(I - s s^T) x_i|`` the update is the normalised weighted sum
    ``s <- normalize(sum_i sign(s . x_i) x_i / d_i)``, started from the
    principal axis of the normalised scatter. Points lying on the current
    axis are handled by the subgradient certificate described in the module
    docstring, so axes passing exactly through a data point are legitimate
    solutions. The sign is fixed so the largest-magnitude component is
    positive.
    """
    cfg = config or SolverConfig()
    pts = _as_points(points)
    if pts.shape[0] < 2:
        raise DegenerateInputError("median axis needs at least 2 points")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVectorError("points must have nonzero length")
    unit = pts / norms[:, None]

    # Collinear input: every point already lies on one axis; return it.
    if np.all(np.abs(unit @ unit[0]) >= 1.0 - 1e-14):
        return DirectionVector(_fix_axis_sign(unit[0].copy()))

    _, vecs = np.linalg.eigh(unit.T @ unit)
    s = vecs[:, -1]

    window = max(cfg.degeneracy_epsilon, _COINCIDENCE_WINDOW)

    def axis_optimal(k: int) -> bool:
        # Subgradient certificate at data axis k (the certificate depends
        # only on the data, so each axis needs checking once).
        resid, n_near = _axis_state(pts, norms, unit[k], window)
        return float(np.linalg.norm(resid)) <= n_near + 1e-12

    checked: set[int] = set()
    for iteration in range(cfg.max_iterations):
        t = pts @ s
        tang = pts - np.outer(t, s)
        dist = np.linalg.norm(tang, axis=1)
        near = dist <= window * norms
        if not np.any(near):
            k = int(np.argmin(dist / norms))
            if dist[k] <= 1e-3 * norms[k] and k not in checked:
                checked.add(k)
                if axis_optimal(k):
                    snapped = unit[k] if unit[k] @ s > 0 else -unit[k]
                    return DirectionVector(_fix_axis_sign(snapped.copy()))

        if np.any(near):
            resid, n_near = _axis_state(pts, norms, s, window)
            resid_norm = float(np.linalg.norm(resid))
            if resid_norm <= n_near + 1e-12:
                # Kink optimum: snap exactly onto the coinciding data axis.
                k = int(np.argmin(dist / norms))
                snapped = unit[k] if unit[k] @ s > 0 else -unit[k]
                return DirectionVector(_fix_axis_sign(snapped.copy()))
            # Capped step away from a non-optimal data axis.
            use = ~near & (t != 0.0)
            pull = (np.sign(t[use]) / dist[use])[:, None] * pts[use]
            target = pull.sum(axis=0)
            target /= np.linalg.norm(target)
            if target @ s < 0:
                target = -target
            step = 1.0 - n_near / resid_norm
            s_new = s + step * (target - s)
            s_new /= np.linalg.norm(s_new)
        else:
            use = (dist > cfg.degeneracy_epsilon * norms) & (t != 0.0)
            pull = (np.sign(t[use]) / dist[use])[:, None] * pts[use]
            v = pull.sum(axis=0)
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                raise DegenerateInputError("axis update vanished; points are perfectly balanced")
            s_new = v / nv

        if s_new @ s < 0:
            s_new = -s_new
        change = float(np.linalg.norm(s_new - s))
        s = s_new
        if change < cfg.rel_tolerance:
            resid, n_near = _axis_state(pts, norms, s, window)
            gen_resid = max(0.0, float(np.linalg.norm(resid)) - n_near)
            if gen_resid <= cfg.fixed_point_tolerance:
                return DirectionVector(_fix_axis_sign(s))
    raise NonConvergenceError(
        f"median axis did not converge within {cfg.max_iterations} iterations"
    )


def spatial_median(points, config: SolverConfig | None = None) -> np.ndarray:
    """Point minimising the summed Euclidean distance to the given points
    (Weiszfeld iteration with the Vardi-Zhang coincidence safeguard).

    At return either the estimating equation ``sum_i (x_i - y) / |x_i - y|``
    has norm within the fixed-point tolerance, or the returned point
    coincides with a data point certified optimal by the subgradient
    condition.
    """
    cfg = config or SolverConfig()
    pts = _as_points(points)
    m = pts.shape[0]
    if m == 1:
        return pts[0].copy()
    center = pts.mean(axis=0)
    scale = float(np.linalg.norm(pts - center, axis=1).max())
    if scale <= 1e-12 * max(1.0, float(np.abs(pts).max())):
        # Cloud spread at rounding level: the median is the centroid to
        # machine precision and the unit-vector sum cannot be driven small.
        return center

    window = max(cfg.degeneracy_epsilon, _COINCIDENCE_WINDOW) * scale

    def vertex_optimal(k: int) -> bool:
        # Subgradient certificate at the data point itself: the other
        # points' unit pulls must not exceed the coinciding multiplicity.
        diff_k = pts - pts[k]
        dist_k = np.linalg.norm(diff_k, axis=1)
        coincide = dist_k <= window
        rest = ~coincide
        if not np.any(rest):
            return True
        resid = (diff_k[rest] / dist_k[rest, None]).sum(axis=0)
        return float(np.linalg.norm(resid)) <= int(coincide.sum()) + 1e-12

    def newton_polish(y):
        # The summed-distance objective is smooth and strongly convex away
        # from the data points; Newton steps replace the linear Weiszfeld
        # crawl once the iterate has settled near an interior optimum.
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist <= window):
            return y
        resid = (diff / dist[:, None]).sum(axis=0)
        resid_norm = float(np.linalg.norm(resid))
        for _ in range(40):
            if resid_norm <= 1e-13 * math.sqrt(m) or np.any(dist <= window):
                break
            units = diff / dist[:, None]
            hess = np.einsum("i,ijk->jk", 1.0 / dist, np.eye(pts.shape[1])[None] - units[:, :, None] * units[:, None, :])
            try:
                step = np.linalg.solve(hess, resid)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            scale_factor = 1.0
            improved = None
            for _ in range(30):
                candidate = y + scale_factor * step
                cand_diff = pts - candidate
                cand_dist = np.linalg.norm(cand_diff, axis=1)
                if np.all(cand_dist > window):
                    cand_resid = (cand_diff / cand_dist[:, None]).sum(axis=0)
                    cand_norm = float(np.linalg.norm(cand_resid))
                    if cand_norm < resid_norm:
                        improved = (candidate, cand_diff, cand_dist, cand_resid, cand_norm)
                        break
                scale_factor *= 0.5
            if improved is None:
                break
            y, diff, dist, resid, resid_norm = improved
        return y

    checked: set[int] = set()
    polished = False
    settle_tol = max(cfg.rel_tolerance, 1e-6)
    y = center
    for _ in range(cfg.max_iterations):
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        near = dist <= window
        if np.any(near):
            n_near = int(near.sum())
            rest = ~near
            resid = (diff[rest] / dist[rest, None]).sum(axis=0)
            resid_norm = float(np.linalg.norm(resid))
            if resid_norm <= n_near + 1e-12:
                # Optimal at (numerically) a data point: return it exactly.
                return pts[int(np.argmin(dist))].copy()
            weights = 1.0 / dist[rest]
            target = (weights[:, None] * pts[rest]).sum(axis=0) / weights.sum()
            y_new = y + (1.0 - n_near / resid_norm) * (target - y)
        else:
            # Plain Weiszfeld crawls into an optimal vertex only linearly;
            # once the iterate homes in on a point, certify the point
            # directly instead of waiting for coincidence.
            k = int(np.argmin(dist))
            if dist[k] <= 1e-3 * scale and k not in checked:
                checked.add(k)
                if vertex_optimal(k):
                    return pts[k].copy()
            weights = 1.0 / dist
            y_new = (weights[:, None] * pts).sum(axis=0) / weights.sum()

        change = float(np.linalg.norm(y_new - y)) / scale
        y = y_new
        if change < settle_tol and not polished:
            polished = True
            y = newton_polish(y)
            change = 0.0  # fall through to the residual check below
        if change < cfg.rel_tolerance or polished:
            diff = pts - y
            dist = np.linalg.norm(diff, axis=1)
            if np.all(dist > window):
                resid = (diff / dist[:, None]).sum(axis=0)
                if float(np.linalg.norm(resid)) <= cfg.fixed_point_tolerance:
                    return y
    raise NonConvergenceError(
        f"spatial median did not converge within {cfg.max_iterations} iterations"
    )


def _scaling_residual(vectors, b, eps, window):
    """Estimating-equation residual for the scaling solve at b.

    Terms within the coincidence window of the fitted diagonal are excluded
    and counted; the generalised residual is max(0, |sum| - count).
    """
    scaled = vectors * b
    totals = scaled.sum(axis=1)
    centered = scaled - totals[:, None] / b.size
    dist = np.linalg.norm(centered, axis=1)
    mag = np.linalg.norm(scaled, axis=1)
    near = (dist <= window * mag) & (mag > 0.0)
    use = ~near & (dist > eps * mag) & (totals != 0.0)
    if not np.any(use):
        resid = np.zeros(b.size)
    else:
        resid = (np.sign(totals[use])[:, None] * centered[use] / dist[use, None]).sum(axis=0)
    n_near = int(near.sum())
    return max(0.0, float(np.linalg.norm(resid)) - n_near)


def _scaling_terms(vecs, b, eps):
    scaled = vecs * b
    totals = scaled.sum(axis=1)
    centered = scaled - totals[:, None] / b.size
    dist_sq = np.einsum("ij,ij->i", centered, centered)
    mag_sq = np.einsum("ij,ij->i", scaled, scaled)
    use = (dist_sq > eps * eps * mag_sq) & (totals != 0.0)
    return totals, centered, np.sqrt(dist_sq), mag_sq, use


def _scaling_equation(vecs, b, eps):
    """Raw estimating-equation vector (degenerate terms dropped)."""
    totals, centered, dist, _, use = _scaling_terms(vecs, b, eps)
    if not np.any(use):
        return np.zeros(b.size)
    return (np.sign(totals[use])[:, None] * centered[use] / dist[use, None]).sum(axis=0)


def _newton_polish(vecs, b, cfg):
    """Newton refinement of the estimating equation with its analytic
    Jacobian.

    The reweighted iteration slows to a crawl when the root lies next to a
    term's kink (a vector whose scaled version is almost parallel to the
    diagonal); Newton restores fast terminal convergence there. Works on
    the gauge-reduced system (b[0] pinned, first equation dropped -- the
    rows of the Jacobian sum to zero structurally). Returns the improved b;
    falls back to the input when the Jacobian is singular.
    """
    n_methods = b.size
    n_reduced = n_methods - 1
    ones_over_n = np.full((n_methods, n_methods), 1.0 / n_methods)
    proj = np.eye(n_methods) - ones_over_n
    resid = _scaling_equation(vecs, b, cfg.degeneracy_epsilon)
    resid_norm = float(np.linalg.norm(resid))
    for _ in range(60):
        if resid_norm <= 1e-13 * max(1.0, math.sqrt(vecs.shape[0])):
            break
        totals, centered, dist, _, use = _scaling_terms(vecs, b, cfg.degeneracy_epsilon)
        signs = np.sign(totals[use])
        inv_dist = 1.0 / dist[use]
        units = centered[use] * inv_dist[:, None]
        d_used = vecs[use]
        # J = sum sgn/dist * (I - u u^T) P diag(d)
        #   = P diag(g) - sum sgn/dist * u (u*d)^T      (u lies in range(P))
        g = ((signs * inv_dist)[:, None] * d_used).sum(axis=0)
        curvature = np.einsum("j,jk,jl->kl", signs * inv_dist, units, units * d_used)
        jac = proj @ np.diag(g) - curvature
        try:
            step_reduced = np.linalg.solve(jac[1:, 1:], -resid[1:])
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step_reduced)):
            break
        step = np.concatenate([[0.0], step_reduced])
        scale = 1.0
        improved = None
        for _ in range(30):
            candidate = b + scale * step
            if np.all(candidate[1:] > 0.0):
                cand_resid = _scaling_equation(vecs, candidate, cfg.degeneracy_epsilon)
                cand_norm = float(np.linalg.norm(cand_resid))
                if cand_norm < resid_norm:
                    improved = (candidate, cand_resid, cand_norm)
                    break
            scale *= 0.5
        if improved is None:
            break
        b, resid, resid_norm = improved
        if np.linalg.norm(scale * step) <= 1e-15 * np.linalg.norm(b):
            break
    return b


def solve_scaling(
    vectors,
    config: SolverConfig | None = None,
    start: ScalingVector | None = None,
) -> ScalingSolution:
    """Solve for the scaling vector b that balances the unit tangent
    directions of the scaled input vectors around the space diagonal.

    The inputs are either raw sample points (zero-intercept model) or all
    pairwise sample differences (intercepts unknown); the estimating
    equation is the same in both cases:

        sum_J sign(v_J . b) * P diag(v_J) b / |P diag(v_J) b| = 0,

    with P the projection onto the hyperplane orthogonal to the space
    diagonal. Each reweighting step computes weights
    ``w_J = sign(v_J . b) / |P diag(v_J) b|`` (terms whose projected norm
    falls below the degeneracy threshold are dropped), assembles
    ``M = sum_J w_J P diag(v_J)`` -- whose rows sum to zero structurally --
    and solves the linear system with the first row replaced by the gauge
    constraint b[0] = 1. Once the iterate settles, a Newton polish on the
    estimating equation sharpens the root to near machine precision (the
    plain reweighting can crawl when the root sits next to a term's kink).

    Parameters
    ----------
    vectors
        m x N array of points or differences, m >= N - 1 in general position.
    config
        Solver tolerances; defaults to ``SolverConfig()``.
    start
        Starting scaling; defaults to all ones.

    Returns
    -------
    ScalingSolution
        Converged scaling with iteration count and fixed-point residual.
    """
    cfg = config or SolverConfig()
    vecs = _as_points(vectors).copy()
    m, n_methods = vecs.shape
    # Canonicalise the terms: the equation is invariant under negating any
    # vector (negation is exact in IEEE), so flipping each to a canonical
    # sign and sorting makes the solve bit-identical under any permutation
    # of the input samples.
    for col in range(n_methods):
        undecided = np.all(vecs[:, :col] == 0.0, axis=1) if col else np.ones(m, bool)
        vecs[undecided & (vecs[:, col] < 0.0)] *= -1.0
    vecs = vecs[np.lexsort(vecs.T[::-1])]
    b = np.ones(n_methods) if start is None else np.array(start.b, dtype=float)

    proj = np.eye(n_methods) - np.full((n_methods, n_methods), 1.0 / n_methods)
    rhs = np.zeros(n_methods)
    rhs[0] = 1.0
    window = max(cfg.degeneracy_epsilon, _COINCIDENCE_WINDOW)
    settle_tol = max(cfg.rel_tolerance, 1e-7)
    polished = False

    def finish(b, iteration):
        resid = _scaling_residual(vecs, b, cfg.degeneracy_epsilon, window)
        if resid > cfg.fixed_point_tolerance:
            return None
        if np.any(b <= 0.0):
            raise OrientationError(
                f"converged scaling has non-positive components: {b.tolist()}"
            )
        return ScalingSolution(
            b=ScalingVector(b),
            iterations=iteration,
            fixed_point_residual=resid,
            converged=True,
        )

    for iteration in range(1, cfg.max_iterations + 1):
        totals, centered, dist, mag_sq, use = _scaling_terms(vecs, b, cfg.degeneracy_epsilon)
        if not np.any(use):
            # Every scaled vector lies on the fitted diagonal: a perfect
            # (noise-free) fit, provided the orientation is right.
            if np.all(dist * dist <= cfg.degeneracy_epsilon**2 * mag_sq):
                if np.any(b <= 0.0):
                    raise OrientationError(
                        f"degenerate-exact scaling has non-positive components: {b.tolist()}"
                    )
                return ScalingSolution(
                    b=ScalingVector(b),
                    iterations=iteration,
                    fixed_point_residual=0.0,
                    converged=True,
                )
            raise SingularSystemError("every term is degenerate at the current iterate")
        weights = np.sign(totals[use]) / dist[use]
        g = (weights[:, None] * vecs[use]).sum(axis=0)

        system = proj @ np.diag(g)
        system[0, :] = 0.0
        system[0, 0] = 1.0
        try:
            b_new = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"reweighted system is singular: {exc}") from exc
        if not np.all(np.isfinite(b_new)) or np.linalg.cond(system) > 1e14:
            raise SingularSystemError("reweighted system is numerically singular")
        if b_new[0] == 0.0:
            raise SingularSystemError("gauge component collapsed to zero")
        b_new = b_new / b_new[0]  # re-pin the gauge exactly

        change = float(np.linalg.norm(b_new - b) / np.linalg.norm(b))
        b = b_new
        if change < settle_tol and not polished:
            polished = True
            b = _newton_polish(vecs, b, cfg)
            solution = finish(b, iteration)
            if solution is not None:
                return solution
        elif change < cfg.rel_tolerance:
            solution = finish(b, iteration)
            if solution is not None:
                return solution
    raise NonConvergenceError(
        f"scaling solve did not converge within {cfg.max_iterations} iterations"
    )
