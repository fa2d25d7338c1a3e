"""Gaussian mixture regression: condition a joint (time, input) model on time.

The behavior model is a mixture over vectors laid out as [t, u_1, ..., u_m]
(elapsed time since obstacle spawn first, control-input channels after).
Internally each component is split into [u; t] blocks; conditioning on a
time instant gives a mixture over the input channels whose component
covariances do not depend on the queried time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gaussmix import GaussianComponent, Mixture, MixtureError, _logsumexp

__all__ = [
    "BehaviorModel",
    "InputDistribution",
    "split_blocks",
    "condition_on_time",
    "regression_curve",
]

LOG_2PI = float(np.log(2.0 * np.pi))
CROSS_BLOCK_TOL = 1e-12


@dataclass(frozen=True)
class BehaviorModel:
    """Joint time/input mixture with per-component blocks pre-extracted.

    ``joint`` keeps the [t, u...] layout used on disk; the block arrays are
    in the internal [u; t] convention.  ``cond_covs`` holds the conditional
    (Schur-complement) covariance of each component, computed once because
    it is independent of the conditioning time.
    """

    joint: Mixture
    weights: np.ndarray        # (M,)
    mu_u: np.ndarray           # (M, du)
    mu_t: np.ndarray           # (M,)
    sig_uu: np.ndarray         # (M, du, du)
    sig_ut: np.ndarray         # (M, du)
    sig_t: np.ndarray          # (M,)
    cond_covs: np.ndarray      # (M, du, du)

    @property
    def input_dimension(self) -> int:
        return self.mu_u.shape[1]

    @property
    def num_components(self) -> int:
        return len(self.joint)

    @cached_property
    def _log_prior(self) -> np.ndarray:
        return np.log(self.weights)


@dataclass(frozen=True)
class InputDistribution:
    """Control-input mixture at one time instant.

    ``used_prior_weights`` flags the far-extrapolation fallback where every
    component's time marginal underflowed and the prior weights were kept.
    """

    mixture: Mixture
    time: float
    used_prior_weights: bool = False


def split_blocks(joint: Mixture) -> BehaviorModel:
    """Split a [t, u...] joint mixture into per-component GMR blocks."""
    d = joint.dimension
    if d < 2:
        raise MixtureError("joint mixture needs a time coordinate plus >= 1 input")
    m = len(joint)
    du = d - 1
    u_idx = np.arange(1, d)

    weights = np.asarray(joint.weights)
    mu_u = joint.means[:, u_idx]
    mu_t = joint.means[:, 0]
    sig_uu = joint.covariances[:, 1:, 1:]
    sig_ut = joint.covariances[:, 1:, 0]
    sig_tu = joint.covariances[:, 0, 1:]
    sig_t = joint.covariances[:, 0, 0]

    for k in range(m):
        if not sig_t[k] > 0.0:
            raise MixtureError(
                f"component {k} has non-positive time variance; model unusable for regression"
            )
        gap = np.abs(sig_ut[k] - sig_tu[k]).max()
        scale = max(np.abs(joint.covariances[k]).max(), 1.0)
        if gap > CROSS_BLOCK_TOL * scale:
            raise MixtureError(f"component {k} cross-covariance blocks are not symmetric")

    cond_covs = sig_uu - np.einsum("ki,kj->kij", sig_ut, sig_ut) / sig_t[:, None, None]
    return BehaviorModel(
        joint=joint,
        weights=weights,
        mu_u=mu_u,
        mu_t=mu_t,
        sig_uu=sig_uu,
        sig_ut=sig_ut,
        sig_t=sig_t,
        cond_covs=cond_covs,
    )


def condition_on_time(bm: BehaviorModel, t: float) -> InputDistribution:
    """Conditional input mixture at elapsed time ``t``.

    Component means follow the usual Gaussian conditioning update, the
    covariances are the precomputed Schur complements, and the weights are
    the prior weights re-weighted by each component's time-marginal density,
    normalized in log space.  If every time marginal underflows (queries
    astronomically far outside the data range), the prior weights are used
    and the result is flagged.
    """
    t = float(t)
    if not np.isfinite(t):
        raise MixtureError(f"conditioning time must be finite, got {t}")

    means = bm.mu_u + bm.sig_ut * ((t - bm.mu_t) / bm.sig_t)[:, None]

    with np.errstate(over="ignore"):
        log_marg = -0.5 * (LOG_2PI + np.log(bm.sig_t) + (t - bm.mu_t) ** 2 / bm.sig_t)
    log_w = bm._log_prior + log_marg

    fallback = not np.isfinite(log_w).any()
    if fallback:
        weights = bm.weights.copy()
    else:
        weights = np.exp(log_w - _logsumexp(log_w[None, :], axis=1))
        weights /= weights.sum()

    comps = tuple(
        GaussianComponent(weights[k], means[k], bm.cond_covs[k])
        for k in range(bm.num_components)
    )
    return InputDistribution(mixture=Mixture(comps), time=t, used_prior_weights=fallback)


def regression_curve(bm: BehaviorModel, t0: float, t1: float, dt: float) -> np.ndarray:
    """Overall conditional mean and per-channel standard deviation on a time grid.

    Returns an array with rows [t, mean..., std...]; the grid covers
    t0 .. t1 inclusive with floor((t1 - t0)/dt) + 1 points.
    """
    if not t0 <= t1:
        raise ValueError("need t0 <= t1")
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    steps = int(np.floor((t1 - t0) / dt + 1e-9)) + 1
    du = bm.input_dimension
    out = np.empty((steps, 1 + 2 * du))
    for i in range(steps):
        t = t0 + i * dt
        dist = condition_on_time(bm, t)
        mean, cov = dist.mixture.moments()
        out[i, 0] = t
        out[i, 1 : 1 + du] = mean
        out[i, 1 + du :] = np.sqrt(np.diag(cov))
    return out
