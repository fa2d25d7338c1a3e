"""Greedy pairwise mixture reduction ranked by a K-L divergence upper bound.

Each merge is moment preserving: the merged component carries the exact
weight, mean, and covariance of the two-component sub-mixture it replaces,
so the overall mixture mean and covariance are invariant under reduction.
The pair to merge is the one with the smallest upper bound

    0.5 * [(w_i + w_j) ln det(S_ij) - w_i ln det(S_i) - w_j ln det(S_j)]

on the K-L divergence between the mixture before and after that merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussmix import GaussianComponent, Mixture, NonPositiveDefiniteError

__all__ = ["MergeRecord", "merge_pair", "kl_upper_bound", "reduce_mixture"]

# jitter used only when scoring rank-deficient covariances; merges use raw matrices
SCORING_JITTER = 1e-12


@dataclass(frozen=True)
class MergeRecord:
    """One greedy merge: indices at merge time, its score, where the result landed."""

    pair: tuple[int, int]
    kl_upper_bound: float
    result_index: int


def merge_pair(a: GaussianComponent, b: GaussianComponent) -> GaussianComponent:
    """Moment-preserving merge of two components of equal dimension."""
    total = a.weight + b.weight
    if total <= 0.0:
        raise ValueError("cannot merge components with zero total weight")
    wa = a.weight / total
    wb = b.weight / total
    mean = wa * a.mean + wb * b.mean
    dmu = a.mean - b.mean
    cov = wa * a.covariance + wb * b.covariance + (wa * wb) * np.outer(dmu, dmu)
    return GaussianComponent(total, mean, cov)


def _chol_logdet(cov: np.ndarray) -> float:
    chol = np.linalg.cholesky(cov)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def kl_upper_bound(a: GaussianComponent, b: GaussianComponent) -> float:
    """Score of merging (a, b); both covariances must be positive definite."""
    merged = merge_pair(a, b)
    try:
        ld_ab = _chol_logdet(merged.covariance)
        ld_a = _chol_logdet(a.covariance)
        ld_b = _chol_logdet(b.covariance)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteError(
            "kl_upper_bound requires positive-definite covariances; "
            "regularize rank-deficient components before scoring"
        ) from None
    total = a.weight + b.weight
    return 0.5 * ((total * ld_ab - a.weight * ld_a) - b.weight * ld_b)


def _logdet_tolerant(cov: np.ndarray) -> float:
    """Log-determinant, adding a tiny diagonal only if the matrix is not PD."""
    try:
        return _chol_logdet(cov)
    except np.linalg.LinAlgError:
        return _chol_logdet(cov + SCORING_JITTER * np.eye(cov.shape[0]))


def reduce_mixture(mix: Mixture, target: int) -> tuple[Mixture, list[MergeRecord]]:
    """Merge the minimum-score pair until at most ``target`` components remain.

    Ties break toward the lexicographically smallest index pair. Pair scores
    are cached and only recomputed for pairs touching the merged component.
    Returns the input mixture unchanged when it is already small enough.
    """
    if target < 1:
        raise ValueError("target component count must be >= 1")
    n = len(mix)
    if n <= target:
        return mix, []

    comps: list[GaussianComponent] = list(mix.components)
    logdets: list[float] = [_logdet_tolerant(c.covariance) for c in comps]

    def score(i: int, j: int) -> tuple[float, GaussianComponent]:
        merged = merge_pair(comps[i], comps[j])
        ld_ab = _logdet_tolerant(merged.covariance)
        total = comps[i].weight + comps[j].weight
        kl = 0.5 * (
            (total * ld_ab - comps[i].weight * logdets[i]) - comps[j].weight * logdets[j]
        )
        return kl, merged

    scores = np.full((n, n), np.inf)
    merged_cache: dict[tuple[int, int], GaussianComponent] = {}
    for i in range(n):
        for j in range(i + 1, n):
            scores[i, j], merged_cache[(i, j)] = score(i, j)

    records: list[MergeRecord] = []
    while len(comps) > target:
        m = len(comps)
        flat = np.argmin(scores[:m, :m])
        i, j = int(flat // m), int(flat % m)
        best = scores[i, j]
        # lexicographic tie-break: argmin of the row-major scan already returns
        # the smallest (i, j) among equal scores
        records.append(MergeRecord(pair=(i, j), kl_upper_bound=float(best), result_index=i))

        merged = merged_cache[(i, j)]
        comps[i] = merged
        logdets[i] = _logdet_tolerant(merged.covariance)
        del comps[j]
        del logdets[j]

        # drop row/column j, then refresh every pair that touches slot i
        scores = np.delete(np.delete(scores, j, axis=0), j, axis=1)
        merged_cache = {
            _shift(pair, j): comp
            for pair, comp in merged_cache.items()
            if j not in pair and i not in pair
        }
        for k in range(len(comps)):
            if k == i:
                continue
            a, b = min(i, k), max(i, k)
            scores[a, b], merged_cache[(a, b)] = score(a, b)

    return Mixture(tuple(comps)), records


def _shift(pair: tuple[int, int], removed: int) -> tuple[int, int]:
    a, b = pair
    return (a - (a > removed), b - (b > removed))
