"""Shared fixtures and independent oracle implementations.

The oracles here deliberately re-derive results by brute force (pair
enumeration, dense grids, derivative-free minimisation) so the library code
is checked against an implementation that shares none of its internals.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from mpbr import MeasurementMatrix


def make_data(values, names=None) -> MeasurementMatrix:
    values = np.asarray(values, dtype=float)
    n, n_methods = values.shape
    names = tuple(names) if names else tuple(f"m{k + 1}" for k in range(n_methods))
    return MeasurementMatrix(values, tuple(f"s{k + 1}" for k in range(n)), names)


def model_values(beta, alpha, r) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    return beta[None, :] * r[:, None] + alpha[None, :]


def gaussian_data(seed, r, beta, alpha, sigma, proportional=True, names=None) -> MeasurementMatrix:
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    r = np.asarray(r, dtype=float)
    scale = sigma * r if proportional else np.full(r.size, sigma)
    noise = rng.standard_normal((r.size, beta.size)) * scale[:, None] * beta[None, :]
    return make_data(model_values(beta, alpha, r) + noise, names)


# ---------------------------------------------------------------------------
# classical two-method Passing-Bablok oracles (pair enumeration)

def enumerate_pb_slopes(x, y):
    """All defined pairwise slopes with the classical conventions:
    0/0 pairs skipped, vertical pairs +/- inf, slopes of exactly -1 dropped."""
    slopes = []
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[j] - x[i]
            dy = y[j] - y[i]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                slopes.append(math.inf if dy > 0 else -math.inf)
                continue
            s = dy / dx
            if s != -1.0:
                slopes.append(s)
    return sorted(slopes)


def shifted_median_slope(x, y) -> float:
    """Classical shifted-median slope, by direct enumeration. Even counts
    combine the two middle slopes by their geometric mean (log-scale
    midpoint), matching the library's tie convention."""
    slopes = enumerate_pb_slopes(x, y)
    m = len(slopes)
    offset = sum(1 for s in slopes if s < -1.0)
    if m % 2 == 1:
        return slopes[(m - 1) // 2 + offset]
    lo, hi = slopes[m // 2 - 1 + offset], slopes[m // 2 + offset]
    if lo > 0 and math.isfinite(hi):
        return math.sqrt(lo * hi)
    if hi < 0:
        return -math.sqrt(lo * hi)
    return 0.5 * (lo + hi)


def defining_sum(x, y, slope) -> int:
    """The sign-pair sum whose root defines the two-method estimate."""
    total = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[j] - x[i]
            dy = y[j] - y[i]
            total += int(np.sign(dy + slope * dx)) * int(np.sign(dy - slope * dx))
    return total


def sign_change_bracket(x, y) -> tuple[float, float]:
    """Bracket [lo, hi] in which the defining sum changes sign.

    The sum counts pairs with |pairwise slope| above the candidate minus
    those below, so the bracket is the middle of the ordered absolute
    slopes (0/0 pairs skipped, vertical pairs at +inf).
    """
    magnitudes = []
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[j] - x[i]
            dy = y[j] - y[i]
            if dx == 0 and dy == 0:
                continue
            magnitudes.append(abs(dy / dx) if dx != 0 else math.inf)
    magnitudes.sort()
    m = len(magnitudes)
    if m % 2 == 1:
        mid = magnitudes[m // 2]
        return mid, mid
    return magnitudes[m // 2 - 1], magnitudes[m // 2]


# ---------------------------------------------------------------------------
# grid / derivative-free oracles

def zero_intercept_objective(points, b) -> float:
    scaled = np.asarray(points, float) * np.asarray(b, float)
    norms = np.linalg.norm(scaled, axis=1)
    diag = np.ones(scaled.shape[1]) / math.sqrt(scaled.shape[1])
    cosines = np.abs(scaled @ diag) / norms
    return float(np.arccos(np.clip(cosines, -1.0, 1.0)).sum())


def log_grid_scaling_min(points, span=2.0, stages=5, grid=41) -> np.ndarray:
    """Brute-force minimiser of the zero-intercept objective over
    (ln b2, ln b3) with staged refinement; N = 3 only."""
    lo2, hi2 = -span, span
    lo3, hi3 = -span, span
    best = (0.0, 0.0)
    for _ in range(stages):
        g2 = np.linspace(lo2, hi2, grid)
        g3 = np.linspace(lo3, hi3, grid)
        values = np.empty((grid, grid))
        for i, l2 in enumerate(g2):
            for j, l3 in enumerate(g3):
                values[i, j] = zero_intercept_objective(
                    points, np.array([1.0, math.exp(l2), math.exp(l3)])
                )
        i, j = np.unravel_index(np.argmin(values), values.shape)
        best = (g2[i], g3[j])
        w2 = (hi2 - lo2) / 8
        w3 = (hi3 - lo3) / 8
        lo2, hi2 = best[0] - w2, best[0] + w2
        lo3, hi3 = best[1] - w3, best[1] + w3
    return np.array([1.0, math.exp(best[0]), math.exp(best[1])])


def sphere_grid_axis_min(points, n_grid=20000) -> np.ndarray:
    """Spherical grid search plus simplex refinement for the median axis
    of 3-d points."""
    points = np.asarray(points, float)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    k = np.arange(n_grid)
    z = 1.0 - 2.0 * (k + 0.5) / n_grid
    radius = np.sqrt(1.0 - z * z)
    theta = golden * k
    candidates = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])
    unit = points / np.linalg.norm(points, axis=1, keepdims=True)
    totals = np.arccos(np.clip(np.abs(candidates @ unit.T), -1.0, 1.0)).sum(axis=1)
    start = candidates[int(np.argmin(totals))]

    def objective(angles):
        t, p = angles
        s = np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])
        return float(np.arccos(np.clip(np.abs(unit @ s), -1.0, 1.0)).sum())

    t0 = math.acos(max(-1.0, min(1.0, start[2])))
    p0 = math.atan2(start[1], start[0])
    result = optimize.minimize(
        objective, [t0, p0], method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000, "maxfev": 4000},
    )
    t, p = result.x
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def nelder_mead_spatial_median(points) -> np.ndarray:
    points = np.asarray(points, float)

    def objective(y):
        return float(np.linalg.norm(points - y, axis=1).sum())

    result = optimize.minimize(
        objective, points.mean(axis=0), method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 40000, "maxfev": 40000},
    )
    return result.x


# ---------------------------------------------------------------------------
# closed forms and rank statistics

def deming_slope(x, y) -> float:
    """Orthogonal-regression slope (equal error variances)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sxx = np.var(x, ddof=1)
    syy = np.var(y, ddof=1)
    sxy = np.cov(x, y, ddof=1)[0, 1]
    return float((syy - sxx + math.sqrt((syy - sxx) ** 2 + 4 * sxy**2)) / (2 * sxy))


def kendall_tau_b_brute(x, y) -> float:
    """Tie-corrected Kendall tau by O(n^2) pair counting."""
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[j] - x[i]
            dy = y[j] - y[i]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    return (concordant - discordant) / denom
