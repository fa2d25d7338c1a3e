import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorreach.gaussmix import GaussianComponent, Mixture, NonPositiveDefiniteError
from rotorreach.reduction import kl_upper_bound, merge_pair, reduce_mixture


def comp1d(w, mu, var):
    return GaussianComponent(w, np.array([mu]), np.array([[var]]))


def random_mixture(rng, n, d):
    comps = []
    for _ in range(n):
        mean = rng.normal(scale=2.0, size=d)
        root = rng.normal(size=(d, d)) * 0.5
        cov = root @ root.T + 0.05 * np.eye(d)
        comps.append(GaussianComponent(rng.uniform(0.1, 1.0), mean, cov))
    return Mixture(tuple(comps))


# ---------------------------------------------------------------------------
# merge_pair
# ---------------------------------------------------------------------------

def test_merge_identical_components_keeps_shape():
    c = GaussianComponent(0.2, np.array([1.0, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    merged = merge_pair(c, c)
    assert merged.weight == pytest.approx(0.4, abs=0.0)
    assert np.array_equal(merged.mean, c.mean)
    assert np.array_equal(merged.covariance, c.covariance)


def test_merge_two_point_distribution():
    merged = merge_pair(comp1d(0.5, 1.0, 0.0), comp1d(0.5, -1.0, 0.0))
    assert merged.mean[0] == pytest.approx(0.0, abs=0.0)
    assert merged.covariance[0, 0] == pytest.approx(1.0, abs=0.0)


def test_merge_matches_sub_mixture_moments():
    rng = np.random.default_rng(0)
    for _ in range(25):
        m = random_mixture(rng, 2, 3)
        a, b = m.components
        merged = merge_pair(a, b)
        mean, cov = m.moments()
        assert merged.weight == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(merged.mean, mean, atol=1e-12)
        assert np.allclose(merged.covariance, cov, atol=1e-12)


def test_merge_zero_total_weight_rejected():
    with pytest.raises(ValueError):
        merge_pair(comp1d(0.0, 0.0, 1.0), comp1d(0.0, 1.0, 1.0))


# ---------------------------------------------------------------------------
# kl_upper_bound
# ---------------------------------------------------------------------------

def test_kl_identical_components_exactly_zero():
    c = GaussianComponent(0.3, np.array([1.0, 2.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    assert kl_upper_bound(c, c) == 0.0


def test_kl_scalar_example():
    a = comp1d(0.5, 0.0, 1.0)
    b = comp1d(0.5, 0.0, 4.0)
    expected = 0.5 * (np.log(2.5) - 0.5 * np.log(4.0))  # ~0.11157
    assert kl_upper_bound(a, b) == pytest.approx(expected, rel=1e-12)
    assert kl_upper_bound(a, b) == pytest.approx(0.11157, abs=5e-6)


def test_kl_increases_with_mean_gap():
    gaps = np.linspace(0.0, 5.0, 40)
    scores = [
        kl_upper_bound(comp1d(0.5, 0.0, 1.0), comp1d(0.5, g, 1.0)) for g in gaps
    ]
    assert all(b > a for a, b in zip(scores, scores[1:]))


def test_kl_rejects_non_pd():
    with pytest.raises(NonPositiveDefiniteError):
        kl_upper_bound(comp1d(0.5, 0.0, 0.0), comp1d(0.5, 1.0, 1.0))


def test_kl_nonnegative_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = random_mixture(rng, 2, 3)
        assert kl_upper_bound(*m.components) >= -1e-12


# ---------------------------------------------------------------------------
# reduce_mixture
# ---------------------------------------------------------------------------

def test_reduce_noop_when_small_enough():
    rng = np.random.default_rng(2)
    m = random_mixture(rng, 4, 2)
    reduced, records = reduce_mixture(m, 4)
    assert reduced is m
    assert records == []


def test_reduce_merges_identical_pair_first():
    c = GaussianComponent(0.25, np.array([0.0]), np.array([[1.0]]))
    other = comp1d(0.5, 5.0, 2.0)
    m = Mixture((c, other, GaussianComponent(0.25, np.array([0.0]), np.array([[1.0]]))))
    reduced, records = reduce_mixture(m, 2)
    assert records[0].pair == (0, 2)
    assert records[0].kl_upper_bound == 0.0
    assert len(reduced) == 2


def test_reduce_preserves_moments():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = random_mixture(rng, 20, 4)
        mean0, cov0 = m.moments()
        reduced, records = reduce_mixture(m, 5)
        mean1, cov1 = reduced.moments()
        assert len(reduced) == 5
        assert len(records) == 15
        assert np.allclose(mean0, mean1, atol=1e-10)
        assert np.allclose(cov0, cov1, atol=1e-10)


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_reduce_moment_preservation_property(target, seed):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, 8, 2)
    mean0, cov0 = m.moments()
    reduced, _ = reduce_mixture(m, target)
    mean1, cov1 = reduced.moments()
    assert len(reduced) == min(8, max(target, 1))
    assert np.allclose(mean0, mean1, atol=1e-10)
    assert np.allclose(cov0, cov1, atol=1e-10)


def test_reduce_to_one_is_global_moment_match():
    rng = np.random.default_rng(4)
    m = random_mixture(rng, 7, 3)
    mean, cov = m.moments()
    reduced, _ = reduce_mixture(m, 1)
    assert len(reduced) == 1
    assert reduced.weights[0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(reduced.means[0], mean, atol=1e-10)
    assert np.allclose(reduced.covariances[0], cov, atol=1e-10)


def test_reduce_deterministic_merge_sequence():
    rng = np.random.default_rng(5)
    m = random_mixture(rng, 12, 3)
    r1, rec1 = reduce_mixture(m, 4)
    r2, rec2 = reduce_mixture(m, 4)
    assert [r.pair for r in rec1] == [r.pair for r in rec2]
    assert [r.kl_upper_bound for r in rec1] == [r.kl_upper_bound for r in rec2]
    assert np.array_equal(r1.means, r2.means)
    assert np.array_equal(r1.covariances, r2.covariances)


def test_reduce_weight_conservation():
    rng = np.random.default_rng(6)
    m = random_mixture(rng, 9, 2)
    reduced, _ = reduce_mixture(m, 3)
    assert reduced.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_reduce_invalid_target():
    rng = np.random.default_rng(7)
    with pytest.raises(ValueError):
        reduce_mixture(random_mixture(rng, 3, 2), 0)


def test_reduce_handles_rank_deficient_components():
    # zero-covariance components appear on early propagation steps
    flat = GaussianComponent(0.4, np.array([0.0, 0.0]), np.zeros((2, 2)))
    fat = GaussianComponent(0.3, np.array([1.0, 0.0]), np.eye(2))
    far = GaussianComponent(0.3, np.array([5.0, 5.0]), np.eye(2) * 2.0)
    m = Mixture((flat, fat, far))
    mean0, cov0 = m.moments()
    reduced, _ = reduce_mixture(m, 2)
    mean1, cov1 = reduced.moments()
    assert np.allclose(mean0, mean1, atol=1e-10)
    assert np.allclose(cov0, cov1, atol=1e-10)
