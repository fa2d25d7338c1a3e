"""Monte-Carlo forward simulation used to cross-check the analytic prediction.

Two input modes: ``uniform`` draws each input channel independently and
uniformly inside the plant bounds (the conservative baseline); ``behavior``
draws from the conditional input mixture at each step (the same law the
analytic propagation pushes forward, so moments must agree).

Randomness is counter-based and split per sample index: sample ``i`` owns
the Philox stream spawned from ``SeedSequence(seed, spawn_key=(i,))``, so
results are reproducible regardless of batching or thread count, and
reductions run in fixed sample-index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussmix import Mixture, psd_factor
from .gmr import BehaviorModel, condition_on_time
from .plant import PlantModel
from .prediction import Belief

__all__ = [
    "McConfig",
    "McResult",
    "run_monte_carlo",
    "convex_hull",
    "polygon_area",
    "points_in_hull",
]

INPUT_MODES = ("uniform", "behavior")


@dataclass(frozen=True)
class McConfig:
    samples: int
    horizon_steps: int
    input_mode: str = "behavior"
    seed: int = 0
    saturate: bool = False
    keep_steps: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.horizon_steps < 0:
            raise ValueError("horizon_steps must be >= 0")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}")


@dataclass(frozen=True)
class McResult:
    final_states: np.ndarray            # (n, 6)
    per_step_states: np.ndarray | None  # (steps+1, n, 6) when kept
    convex_hull_2d: np.ndarray          # (k, 2) CCW vertices over (p_x, p_y)
    empirical_mean: np.ndarray          # (6,)
    empirical_cov: np.ndarray           # (6, 6)


def _per_sample_noise(cfg: McConfig, n_uniform: int, n_normal: int) -> tuple:
    """Pre-draw each sample's randomness from its own spawned Philox stream."""
    uniforms = np.empty((cfg.samples, n_uniform))
    normals = np.empty((cfg.samples, n_normal))
    for i in range(cfg.samples):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        )
        uniforms[i] = rng.random(n_uniform)
        normals[i] = rng.standard_normal(n_normal)
    return uniforms, normals


def _categorical(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    edges = np.cumsum(weights)
    edges[-1] = 1.0 + 1e-15
    return np.searchsorted(edges, u, side="right").clip(0, weights.shape[0] - 1)


def run_monte_carlo(
    initial: Belief,
    pm: PlantModel,
    bm: BehaviorModel | None,
    cfg: McConfig,
) -> McResult:
    """Sample trajectories of the closed-loop stochastic system.

    Each sample draws its start state from the initial belief, then steps
    the plant under per-step input draws.  Behavior mode requires ``bm`` and
    saturates inputs only when ``cfg.saturate`` is set; uniform mode is
    inside the bounds by construction.
    """
    if cfg.input_mode == "behavior" and bm is None:
        raise ValueError("behavior input mode requires a behavior model")

    h = cfg.horizon_steps
    n = cfg.samples
    mix = initial.mixture
    if cfg.input_mode == "behavior":
        uniforms, normals = _per_sample_noise(cfg, 1 + h, 6 + 2 * h)
    else:
        uniforms, normals = _per_sample_noise(cfg, 1 + 2 * h, 6)

    # start states: component pick then Gaussian draw, per sample
    comp_idx = _categorical(np.asarray(mix.weights), uniforms[:, 0])
    factors = np.stack([psd_factor(c) for c in mix.covariances])
    states = mix.means[comp_idx] + np.einsum(
        "nij,nj->ni", factors[comp_idx], normals[:, :6]
    )

    per_step = np.empty((h + 1, n, 6)) if cfg.keep_steps else None
    if per_step is not None:
        per_step[0] = states

    a_t, b_t = pm.a.T, pm.b.T
    lo = np.array([pm.params.alpha_bounds[0], pm.params.thrust_bounds[0]])
    hi = np.array([pm.params.alpha_bounds[1], pm.params.thrust_bounds[1]])

    if cfg.input_mode == "behavior":
        cond_chols = None  # conditional covariances are time independent
    for k in range(h):
        t_k = initial.time + k * pm.dt
        if cfg.input_mode == "uniform":
            raw = uniforms[:, 1 + 2 * k : 3 + 2 * k]
            u = lo + raw * (hi - lo)
        else:
            dist = condition_on_time(bm, t_k)
            if cond_chols is None:
                cond_chols = np.stack([psd_factor(c) for c in dist.mixture.covariances])
            w = np.asarray(dist.mixture.weights)
            idx = _categorical(w, uniforms[:, 1 + k])
            z = normals[:, 6 + 2 * k : 8 + 2 * k]
            u = dist.mixture.means[idx] + np.einsum("nij,nj->ni", cond_chols[idx], z)
            if cfg.saturate:
                u = np.clip(u, lo, hi)
        states = states @ a_t + u @ b_t
        if per_step is not None:
            per_step[k + 1] = states

    mean = states.mean(axis=0)
    cov = np.cov(states, rowvar=False).reshape(6, 6) if n > 1 else np.zeros((6, 6))
    hull = convex_hull(states[:, :2])
    return McResult(
        final_states=states,
        per_step_states=per_step,
        convex_hull_2d=hull,
        empirical_mean=mean,
        empirical_cov=cov,
    )


# ---------------------------------------------------------------------------
# planar convex hull (monotone chain)
# ---------------------------------------------------------------------------

def convex_hull(points) -> np.ndarray:
    """CCW convex hull vertices; collinear boundary points are excluded.

    Degenerate inputs collapse naturally: identical points give a single
    vertex, collinear points give the two extremes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("need a non-empty (n, 2) point array")
    uniq = np.unique(pts, axis=0)  # lexicographic sort
    if uniq.shape[0] == 1:
        return uniq

    def build(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(uniq)
    upper = build(uniq[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all collinear: keep the two extremes
        hull = [uniq[0], uniq[-1]]
    return np.asarray(hull)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(vertices) -> float:
    """Shoelace area of a simple polygon (0 for degenerate hulls)."""
    v = np.asarray(vertices, dtype=float)
    if v.shape[0] < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def points_in_hull(points, hull, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask: inside-or-on test against a CCW convex hull."""
    pts = np.asarray(points, dtype=float)
    hull = np.asarray(hull, dtype=float)
    if hull.shape[0] == 1:
        return np.all(np.abs(pts - hull[0]) <= tol, axis=1)
    if hull.shape[0] == 2:
        a, b = hull
        ab = b - a
        denom = float(ab @ ab)
        s = ((pts - a) @ ab) / denom
        proj = a + np.clip(s, 0.0, 1.0)[:, None] * ab
        return np.linalg.norm(pts - proj, axis=1) <= tol
    inside = np.ones(pts.shape[0], dtype=bool)
    for i in range(hull.shape[0]):
        a = hull[i]
        b = hull[(i + 1) % hull.shape[0]]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        edge_len = np.hypot(b[0] - a[0], b[1] - a[1])
        inside &= cross >= -tol * max(edge_len, 1.0)
    return inside
