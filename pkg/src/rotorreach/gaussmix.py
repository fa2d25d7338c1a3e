"""Gaussian mixtures: density evaluation, sampling, moments, EM fitting.

A :class:`Mixture` is the common currency of the toolkit: pilot behavior
models, state beliefs, and initial-uncertainty models are all weighted sums
of Gaussian components.  Construction normalizes weights; values are
immutable afterwards and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "GaussianComponent",
    "Mixture",
    "EmConfig",
    "EmResult",
    "MixtureError",
    "NonPositiveDefiniteError",
    "fit_em",
    "marginal",
    "mixture_from_json",
    "mixture_to_json",
    "load_mixture",
    "save_mixture",
    "psd_factor",
]

SYMMETRY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-9
LOG_2PI = float(np.log(2.0 * np.pi))


class MixtureError(ValueError):
    """Invalid mixture construction, layout, or evaluation."""


class NonPositiveDefiniteError(MixtureError):
    """A covariance that must be positive definite is not."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: nonnegative weight, mean, symmetric covariance."""

    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean)
        cov = np.array(self.covariance, dtype=float)
        if mean.ndim != 1:
            raise MixtureError(f"mean must be a vector, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise MixtureError(f"covariance shape {cov.shape} does not match dimension {d}")
        if not np.isfinite(mean).all() or not np.isfinite(cov).all():
            raise MixtureError("non-finite component parameters")
        weight = float(self.weight)
        if not np.isfinite(weight) or weight < 0.0:
            raise MixtureError(f"weight must be finite and >= 0, got {weight}")
        scale = np.abs(cov).max() if cov.size else 0.0
        asym = np.abs(cov - cov.T).max() if cov.size else 0.0
        if asym > SYMMETRY_TOL * max(scale, 1.0):
            raise MixtureError(f"covariance asymmetry {asym:.3e} exceeds tolerance")
        if asym > 0.0:
            cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", _frozen_array(cov))

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class Mixture:
    """Ordered Gaussian components of equal dimension; weights sum to one.

    Weights are normalized on construction, so any operation that returns a
    Mixture re-establishes the unit-sum invariant.
    """

    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise MixtureError("mixture needs at least one component")
        d = comps[0].dimension
        for k, c in enumerate(comps):
            if c.dimension != d:
                raise MixtureError(f"component {k} has dimension {c.dimension}, expected {d}")
        total = sum(c.weight for c in comps)
        if not np.isfinite(total) or total <= 0.0:
            raise MixtureError(f"weights must have positive finite sum, got {total}")
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            comps = tuple(
                GaussianComponent(c.weight / total, c.mean, c.covariance) for c in comps
            )
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    def __len__(self) -> int:
        return len(self.components)

    @cached_property
    def weights(self) -> np.ndarray:
        return _frozen_array([c.weight for c in self.components])

    @cached_property
    def means(self) -> np.ndarray:
        return _frozen_array([c.mean for c in self.components])

    @cached_property
    def covariances(self) -> np.ndarray:
        return _frozen_array([c.covariance for c in self.components])

    @cached_property
    def _cholesky(self) -> np.ndarray:
        chols = np.empty_like(self.covariances)
        for k, cov in enumerate(self.covariances):
            try:
                chols[k] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise NonPositiveDefiniteError(
                    f"component {k} covariance is not positive definite"
                ) from None
        return chols

    def log_density(self, x) -> np.ndarray | float:
        """Stable log of the mixture density at ``x`` (vector or (n, d) batch).

        Uses per-component Cholesky factors and a log-sum-exp reduction, so
        values far below the underflow threshold of ``density`` stay finite.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise MixtureError(
                f"points of dimension {pts.shape[-1] if pts.ndim else '?'} "
                f"incompatible with mixture dimension {self.dimension}"
            )
        logs = np.empty((pts.shape[0], len(self)))
        chols = self._cholesky
        for k in range(len(self)):
            logs[:, k] = _log_gauss(pts, self.means[k], chols[k], self.weights[k])
        out = _logsumexp(logs, axis=1)
        return float(out[0]) if single else out

    def density(self, x) -> np.ndarray | float:
        return np.exp(self.log_density(x))

    def sample(self, n: int, seed) -> np.ndarray:
        """Draw ``n`` vectors: categorical component choice, then Gaussian draw.

        ``seed`` may be an int or any ``numpy.random`` seed/Generator.
        Degenerate covariances are handled by a symmetric PSD factorization,
        so zero-variance directions reproduce the mean exactly.
        """
        if n < 1:
            raise MixtureError("sample size must be >= 1")
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dimension))
        factors = np.stack([psd_factor(c) for c in self.covariances])
        return self.means[idx] + np.einsum("nij,nj->ni", factors[idx], z)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Overall (mean, covariance): first two moments of the mixture law."""
        w = self.weights
        mean = w @ self.means
        diff = self.means - mean
        cov = np.einsum("k,kij->ij", w, self.covariances)
        cov = cov + np.einsum("k,ki,kj->ij", w, diff, diff)
        return mean, cov


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    return np.squeeze(hi, axis=axis) + np.log(np.sum(np.exp(a - hi), axis=axis))


def _log_gauss(pts: np.ndarray, mean: np.ndarray, chol: np.ndarray, weight: float) -> np.ndarray:
    """log(weight * N(pts; mean, L L^T)) for a batch of points."""
    d = mean.shape[0]
    sol = solve_triangular(chol, (pts - mean).T, lower=True, check_finite=False)
    maha = np.sum(sol**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    logw = np.log(weight) if weight > 0.0 else -np.inf
    return logw - 0.5 * (d * LOG_2PI + logdet + maha)


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, tolerant of tiny negative eigenvalues."""
    vals, vecs = np.linalg.eigh(cov)
    floor = -1e-9 * max(1.0, float(vals.max(initial=0.0)))
    if vals.min() < floor:
        raise NonPositiveDefiniteError(f"covariance has eigenvalue {vals.min():.3e} < 0")
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def marginal(mix: Mixture, indices) -> Mixture:
    """Marginal mixture over the given coordinate indices (exact for Gaussians)."""
    idx = np.asarray(indices, dtype=int)
    comps = [
        GaussianComponent(c.weight, c.mean[idx], c.covariance[np.ix_(idx, idx)])
        for c in mix.components
    ]
    return Mixture(tuple(comps))


# ---------------------------------------------------------------------------
# EM fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmConfig:
    """EM fit settings. ``num_components`` is the design parameter M.

    ``covariance_floor`` is added to covariance diagonals in every M-step;
    ``None`` selects 1e-6 times the per-dimension data variance.
    """

    num_components: int
    max_iterations: int = 500
    log_likelihood_tolerance: float = 1e-6
    covariance_floor: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_components < 1:
            raise MixtureError("num_components must be >= 1")
        if self.max_iterations < 1:
            raise MixtureError("max_iterations must be >= 1")
        if not self.log_likelihood_tolerance > 0.0:
            raise MixtureError("log_likelihood_tolerance must be > 0")
        if self.covariance_floor is not None and self.covariance_floor < 0.0:
            raise MixtureError("covariance_floor must be >= 0")


@dataclass(frozen=True)
class EmResult:
    mixture: Mixture
    iterations: int
    log_likelihood: float
    log_likelihood_history: tuple[float, ...]
    rescued_iterations: tuple[int, ...] = ()


def fit_em(data, cfg: EmConfig) -> EmResult:
    """Maximum-likelihood mixture fit by expectation maximization.

    Initialization is k-means++ seeding with ``cfg.seed`` followed by a
    single nearest-center assignment; cluster sample moments (plus floor)
    seed the components.  Total log-likelihood is checked non-decreasing at
    every iteration (1e-8 slack for the covariance floor), except across an
    empty-cluster rescue, where the rescued component is re-seeded at the
    datum with the lowest log-density under the current mixture.  A decrease
    beyond the slack can only come from the covariance floor fighting a
    collapsing component; the step is rejected and the previous iterate is
    returned, so the reported history is non-decreasing everywhere except
    possibly across a rescue re-seed.
    Convergence: relative log-likelihood change below the tolerance.
    Components are returned sorted by descending weight.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise MixtureError("data must be a non-empty (n, d) array")
    if not np.isfinite(x).all():
        raise MixtureError("data contains non-finite values")
    n, d = x.shape
    m = cfg.num_components
    if m > n:
        raise MixtureError(f"num_components={m} exceeds number of data points {n}")

    if cfg.covariance_floor is None:
        floor = 1e-6 * x.var(axis=0)
    else:
        floor = np.full(d, float(cfg.covariance_floor))
    floor_mat = np.diag(floor)

    weights, means, covs = _init_kmeanspp(x, m, floor_mat, cfg.seed)

    history: list[float] = []
    rescued: list[int] = []
    prev_ll = -np.inf
    prev_params = (weights, means, [c.copy() for c in covs])
    iterations = 0
    for it in range(1, cfg.max_iterations + 1):
        log_resp = np.empty((n, m))
        for k in range(m):
            chol = _chol_with_jitter(covs[k])
            log_resp[:, k] = _log_gauss(x, means[k], chol, weights[k])
        row_ll = _logsumexp(log_resp, axis=1)
        ll = float(np.sum(row_ll))

        if it > 1 and ll < prev_ll - 1e-8 * max(1.0, abs(prev_ll)) and (it - 1) not in rescued:
            # the covariance floor is fighting a collapsing component; reject
            # the step and keep the previous (monotone) iterate
            weights, means, covs = prev_params
            break

        rescue_happened = False
        resp = np.exp(log_resp - row_ll[:, None])
        nk = resp.sum(axis=0)
        dead = np.flatnonzero(nk < 1e-12)
        if dead.size:
            # re-seed dead components at the worst-represented data, one each
            worst_order = np.argsort(row_ll, kind="stable")
            for k, worst in zip(dead, worst_order[: dead.size]):
                resp[:, k] = 0.0
                resp[worst, :] = 0.0
                resp[worst, k] = 1.0
            rescue_happened = True
        if rescue_happened:
            nk = resp.sum(axis=0)
            rescued.append(it)

        iterations = it
        history.append(ll)
        prev_params = (weights, means, [c.copy() for c in covs])

        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        for k in range(m):
            diff = x - means[k]
            covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k] + floor_mat

        denom = abs(prev_ll) if prev_ll != -np.inf and prev_ll != 0.0 else 1.0
        if prev_ll != -np.inf and abs(ll - prev_ll) < cfg.log_likelihood_tolerance * denom:
            break
        prev_ll = ll

    order = np.argsort(-weights, kind="stable")
    comps = tuple(
        GaussianComponent(weights[k], means[k], _symmetrize(covs[k])) for k in order
    )
    return EmResult(
        mixture=Mixture(comps),
        iterations=iterations,
        log_likelihood=history[-1],
        log_likelihood_history=tuple(history),
        rescued_iterations=tuple(rescued),
    )


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def _chol_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Cholesky with escalating diagonal jitter; only touches singular inputs."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.trace(cov)) / cov.shape[0], 1e-300)
    for exponent in range(-12, 1):
        jitter = scale * 10.0**exponent
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NonPositiveDefiniteError("covariance not factorable even with jitter")


def _init_kmeanspp(x: np.ndarray, m: int, floor_mat: np.ndarray, seed) -> tuple:
    n, d = x.shape
    rng = np.random.default_rng(seed)
    centers = np.empty((m, d))
    centers[0] = x[rng.integers(n)]
    dist2 = np.sum((x - centers[0]) ** 2, axis=1)
    for k in range(1, m):
        total = dist2.sum()
        if total <= 0.0:
            centers[k] = x[rng.integers(n)]
        else:
            centers[k] = x[rng.choice(n, p=dist2 / total)]
        dist2 = np.minimum(dist2, np.sum((x - centers[k]) ** 2, axis=1))

    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    weights = np.empty(m)
    means = np.empty((m, d))
    covs = np.empty((m, d, d))
    global_cov = np.cov(x, rowvar=False, bias=True).reshape(d, d)
    for k in range(m):
        members = x[assign == k]
        if members.shape[0] == 0:
            members = x[[int(np.argmax(d2[:, k]))]]
        weights[k] = max(members.shape[0], 1) / n
        means[k] = members.mean(axis=0)
        if members.shape[0] >= 2:
            covs[k] = np.cov(members, rowvar=False, bias=True).reshape(d, d) + floor_mat
        else:
            covs[k] = global_cov + floor_mat
    weights /= weights.sum()
    return weights, means, covs


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def mixture_to_json(mix: Mixture) -> dict:
    return {
        "dimension": mix.dimension,
        "components": [
            {
                "weight": c.weight,
                "mean": c.mean.tolist(),
                "covariance": c.covariance.tolist(),
            }
            for c in mix.components
        ],
    }


def mixture_from_json(obj: dict) -> Mixture:
    try:
        dim = int(obj["dimension"])
        raw = obj["components"]
    except (KeyError, TypeError) as exc:
        raise MixtureError(f"malformed mixture object: {exc}") from exc
    comps = []
    for k, c in enumerate(raw):
        comp = GaussianComponent(c["weight"], c["mean"], c["covariance"])
        if comp.dimension != dim:
            raise MixtureError(f"component {k} dimension {comp.dimension} != {dim}")
        comps.append(comp)
    return Mixture(tuple(comps))


def save_mixture(mix: Mixture, path) -> None:
    Path(path).write_text(json.dumps(mixture_to_json(mix), indent=2, sort_keys=True))


def load_mixture(path) -> Mixture:
    return mixture_from_json(json.loads(Path(path).read_text()))
