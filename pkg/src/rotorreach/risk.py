"""Danger-zone collision probability of a position-marginal state belief.

The probability of landing in an axis-aligned rectangle is the weighted sum
of per-component bivariate-normal rectangle probabilities.  Correlated
components make that integral non-separable, so each one is evaluated by
adaptive 2-D quadrature of the component density with absolute tolerance
1e-8.  Degenerate marginals (zero variance in some direction) fall back to
the exact 1-D / point-mass limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import dblquad
from scipy.stats import norm

from .gaussmix import marginal
from .prediction import Belief, BeliefTrajectory

__all__ = ["DangerZone", "collision_probability", "risk_profile"]

QUAD_ABS_TOL = 1e-8
# beyond this many standard deviations the leftover mass is far below the tolerance
TAIL_SIGMAS = 12.0
DEGENERATE_RATIO = 1e-12


@dataclass(frozen=True)
class DangerZone:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("danger zone bounds must satisfy min < max")

    @classmethod
    def from_flag(cls, text: str) -> "DangerZone":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("zone flag needs xmin,xmax,ymin,ymax")
        return cls(*parts)


def collision_probability(belief: Belief, zone: DangerZone) -> float:
    """Cumulative probability of the (p_x, p_y) marginal over the rectangle."""
    pos = marginal(belief.mixture, [0, 1])
    total = 0.0
    for c in pos.components:
        if c.weight == 0.0:
            continue
        total += c.weight * _rectangle_probability(c.mean, c.covariance, zone)
    return float(min(max(total, 0.0), 1.0))


def risk_profile(traj: BeliefTrajectory, zone: DangerZone) -> list[tuple[float, float]]:
    """Per-step (time, collision probability); not monotone in general."""
    return [(b.time, collision_probability(b, zone)) for b in traj.beliefs]


def _rectangle_probability(mean: np.ndarray, cov: np.ndarray, zone: DangerZone) -> float:
    vals = np.linalg.eigvalsh(cov)
    scale = max(float(vals[-1]), 0.0)
    if vals[0] < -1e-9 * max(scale, 1.0):
        raise np.linalg.LinAlgError("position marginal covariance is indefinite")

    if scale <= DEGENERATE_RATIO:
        # point mass
        inx = zone.x_min <= mean[0] <= zone.x_max
        iny = zone.y_min <= mean[1] <= zone.y_max
        return 1.0 if (inx and iny) else 0.0
    if vals[0] <= DEGENERATE_RATIO * scale:
        return _rank1_probability(mean, cov, zone)

    sx = float(np.sqrt(cov[0, 0]))
    sy = float(np.sqrt(cov[1, 1]))
    x_lo = max(zone.x_min, mean[0] - TAIL_SIGMAS * sx)
    x_hi = min(zone.x_max, mean[0] + TAIL_SIGMAS * sx)
    y_lo = max(zone.y_min, mean[1] - TAIL_SIGMAS * sy)
    y_hi = min(zone.y_max, mean[1] + TAIL_SIGMAS * sy)
    if x_lo >= x_hi or y_lo >= y_hi:
        return 0.0

    prec = np.linalg.inv(cov)
    lognorm = -np.log(2.0 * np.pi) - 0.5 * np.log(np.linalg.det(cov))

    def pdf(y, x):
        dx = x - mean[0]
        dy = y - mean[1]
        quad_form = prec[0, 0] * dx * dx + 2.0 * prec[0, 1] * dx * dy + prec[1, 1] * dy * dy
        return np.exp(lognorm - 0.5 * quad_form)

    value, _ = dblquad(pdf, x_lo, x_hi, y_lo, y_hi, epsabs=QUAD_ABS_TOL, epsrel=1e-10)
    return float(min(max(value, 0.0), 1.0))


def _rank1_probability(mean: np.ndarray, cov: np.ndarray, zone: DangerZone) -> float:
    """Mass lives on the line mean + s*v with s ~ N(0, lam): intersect intervals."""
    vals, vecs = np.linalg.eigh(cov)
    lam = float(vals[-1])
    v = vecs[:, -1]
    sd = np.sqrt(lam)

    lo, hi = -np.inf, np.inf
    for axis, (a_lo, a_hi) in enumerate(
        [(zone.x_min, zone.x_max), (zone.y_min, zone.y_max)]
    ):
        if abs(v[axis]) * sd <= DEGENERATE_RATIO:
            if not a_lo <= mean[axis] <= a_hi:
                return 0.0
            continue
        bounds = sorted(((a_lo - mean[axis]) / v[axis], (a_hi - mean[axis]) / v[axis]))
        lo = max(lo, bounds[0])
        hi = min(hi, bounds[1])
    if lo >= hi:
        return 0.0
    return float(norm.cdf(hi / sd) - norm.cdf(lo / sd))
