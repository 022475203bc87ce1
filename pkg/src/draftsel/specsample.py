"""Single-draft speculative sampling and its exact acceptance analysis."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .prob import RESIDUAL_FLOOR, DegenerateResidual, TokenDist, _check_pair, residual_dist, sample_index


class SpecSampleOutcome(NamedTuple):
    token: int
    accepted: bool


def accept_ratio(p, q) -> np.ndarray:
    """Per-token acceptance ``min(1, q/p)``; zero where ``p`` has no mass."""
    a, b = _check_pair(p, q)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(a > 0, np.minimum(1.0, b / np.where(a > 0, a, 1.0)), 0.0)


def spec_sample_step(x: int, p, q, rng: np.random.Generator) -> SpecSampleOutcome:
    """Accept ``x`` with probability ``min(1, q(x)/p(x))``, else resample from the residual.

    Draws one uniform for the accept test and, only on rejection, one more
    for the residual inverse-CDF draw.
    """
    a, b = _check_pair(p, q)
    if not 0 <= x < a.size or a[x] <= 0.0:
        raise ValueError(f"draft token {x} outside draft support")
    beta = min(1.0, b[x] / a[x])
    if rng.random() < beta:
        return SpecSampleOutcome(int(x), True)
    # unnormalized residual: sample_index scales by the total itself
    r = b - np.minimum(a, b)
    if r.sum() <= RESIDUAL_FLOOR:
        return SpecSampleOutcome(int(x), True)
    return SpecSampleOutcome(sample_index(r, rng.random()), False)


def accept_prob_single(p, q) -> float:
    a, b = _check_pair(p, q)
    return float(np.minimum(a, b).sum())


def transition_matrix(p, q) -> tuple[np.ndarray, np.ndarray]:
    """Conditional output law of one speculative step for each draft token.

    Returns ``(M, beta)`` with ``M[x]`` the law of the output given draft
    token ``x`` and ``beta[x]`` its acceptance probability.
    """
    a, b = _check_pair(p, q)
    beta = accept_ratio(a, b)
    n = a.size
    try:
        r = residual_dist(a, b).probs
    except DegenerateResidual:
        r = np.zeros(n)
        beta = np.where(a > 0, 1.0, beta)
    M = np.diag(beta) + np.outer(1.0 - beta, r)
    return M, beta


def exact_output_dist_single(p, q) -> TokenDist:
    """Law of the speculative-sampling output when the draft token is drawn from ``p``."""
    a, _ = _check_pair(p, q)
    M, _ = transition_matrix(p, q)
    return TokenDist(a @ M)
