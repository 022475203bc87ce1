"""Pair-selection weights for two-draft importance weighted sampling."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .prob import DimensionMismatch, TokenDist, as_dist

_CLIP = 1e-9


def _clean(W: np.ndarray) -> np.ndarray:
    if np.any(W < -_CLIP) or np.any(W > 1 + _CLIP):
        raise ValueError("weights must lie in [0, 1]")
    return np.clip(W, 0.0, 1.0)


class WeightMatrix:
    """Weights for an unordered input pair from identical drafts.

    ``W[i, j]`` is the probability of outputting ``i`` when the pair
    ``{i, j}`` is observed in either order.  Only the upper triangle is
    free; ``W[j, i] = 1 - W[i, j]``.
    """

    __slots__ = ("_W",)

    def __init__(self, W):
        W = np.array(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        up = np.triu(_clean(W), 1)
        full = up + np.tril(1.0 - up.T, -1)
        np.fill_diagonal(full, 1.0)
        full.setflags(write=False)
        self._W = full

    @classmethod
    def from_pairs(cls, n: int, pairs: Mapping[tuple[int, int], float], default: float = 0.5):
        W = np.full((n, n), float(default))
        for (i, j), w in pairs.items():
            if i == j:
                raise ValueError("pair weights need distinct tokens")
            if i < j:
                W[i, j] = w
            else:
                W[j, i] = 1.0 - w
        return cls(W)

    @classmethod
    def symmetric(cls, n: int) -> "WeightMatrix":
        return cls(np.full((n, n), 0.5))

    @property
    def n(self) -> int:
        return self._W.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._W

    def __getitem__(self, ij) -> float:
        return float(self._W[ij])

    def upper(self) -> dict[tuple[int, int], float]:
        n = self.n
        return {(i, j): float(self._W[i, j]) for i in range(n) for j in range(i + 1, n)}

    def selected_dist(self, p) -> TokenDist:
        p = as_dist(p).probs
        if p.size != self.n:
            raise DimensionMismatch("weights and draft differ in size")
        W0 = self._W.copy()
        np.fill_diagonal(W0, 0.0)
        return TokenDist(p * p + 2.0 * p * (W0 @ p))

    def choose(self, x1: int, x2: int, u: float) -> int:
        if x1 == x2:
            return int(x1)
        i, j = min(x1, x2), max(x1, x2)
        return int(i) if u < self._W[i, j] else int(j)

    def first_prob(self) -> np.ndarray:
        """``F[a, b]``: probability the output is the first input for ordered input ``(a, b)``."""
        F = self._W.copy()
        np.fill_diagonal(F, 1.0)
        return F

    def __repr__(self) -> str:
        return f"WeightMatrix(n={self.n})"


class OrderedWeightMatrix:
    """Weights for an ordered input pair from two different drafts.

    ``W[a, b]`` (``a != b``) is the probability of outputting the smaller
    token id ``min(a, b)`` given first input ``a`` and second input ``b``;
    the companion ``1 - W[a, b]`` picks the larger one.
    """

    __slots__ = ("_W",)

    def __init__(self, W):
        W = np.array(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        W = _clean(W)
        np.fill_diagonal(W, 1.0)
        W.setflags(write=False)
        self._W = W

    @classmethod
    def from_unordered(cls, w: WeightMatrix) -> "OrderedWeightMatrix":
        up = np.triu(w.matrix, 1)
        return cls(up + up.T)

    @classmethod
    def symmetric(cls, n: int) -> "OrderedWeightMatrix":
        return cls(np.full((n, n), 0.5))

    @property
    def n(self) -> int:
        return self._W.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._W

    def __getitem__(self, ab) -> float:
        return float(self._W[ab])

    def first_prob(self) -> np.ndarray:
        n = self.n
        F = np.where(np.arange(n)[:, None] < np.arange(n)[None, :], self._W, 1.0 - self._W)
        np.fill_diagonal(F, 1.0)
        return F

    def selected_dist(self, p1, p2) -> TokenDist:
        p1, p2 = as_dist(p1).probs, as_dist(p2).probs
        if not p1.size == p2.size == self.n:
            raise DimensionMismatch("weights and drafts differ in size")
        P = np.outer(p1, p2)
        F = self.first_prob()
        return TokenDist((P * F).sum(axis=1) + (P * (1.0 - F)).sum(axis=0))

    def choose(self, x1: int, x2: int, u: float) -> int:
        if x1 == x2:
            return int(x1)
        lo, hi = min(x1, x2), max(x1, x2)
        return int(lo) if u < self._W[x1, x2] else int(hi)

    def __repr__(self) -> str:
        return f"OrderedWeightMatrix(n={self.n})"
