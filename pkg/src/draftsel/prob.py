"""Finite token distributions and the elementary operations on them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Construction tolerance: inputs whose mass is within this of 1 are accepted
# and renormalized exactly.
SUM_TOL = 1e-9
# Negative float noise below this magnitude is clipped to zero.
NEG_TOL = 1e-12
# residual mass at or below this counts as p == q
RESIDUAL_FLOOR = 1e-14


class DimensionMismatch(ValueError):
    pass


class DegenerateResidual(ValueError):
    pass


class IngestError(ValueError):
    pass


class TokenDist:
    """Immutable probability vector over token ids ``0..n-1``."""

    __slots__ = ("_probs",)

    def __init__(self, probs: Iterable[float] | np.ndarray | "TokenDist"):
        if isinstance(probs, TokenDist):
            self._probs = probs._probs
            return
        arr = np.array(probs, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("a distribution needs at least one token")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite")
        if np.any(arr < -NEG_TOL):
            raise ValueError(f"negative probability {arr.min()!r}")
        arr = np.where(arr < 0.0, 0.0, arr)
        total = arr.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        arr = arr / total
        arr.setflags(write=False)
        self._probs = arr

    @classmethod
    def from_logits(cls, logits: Sequence[float]) -> "TokenDist":
        z = np.asarray(logits, dtype=float)
        z = np.exp(z - z.max())
        return cls(z / z.sum())

    @classmethod
    def point(cls, n: int, token: int) -> "TokenDist":
        arr = np.zeros(n)
        arr[token] = 1.0
        return cls(arr)

    @classmethod
    def uniform(cls, n: int) -> "TokenDist":
        return cls(np.full(n, 1.0 / n))

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def n(self) -> int:
        return self._probs.size

    def __len__(self) -> int:
        return self._probs.size

    def __getitem__(self, i):
        return self._probs[i]

    def __iter__(self):
        return iter(self._probs.tolist())

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._probs
        return self._probs.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenDist):
            return NotImplemented
        return np.array_equal(self._probs, other._probs)

    def __hash__(self) -> int:
        return hash(self._probs.tobytes())

    def __repr__(self) -> str:
        return f"TokenDist({np.array2string(self._probs, precision=6)})"

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = as_dist(other)
        return self.n == other.n and bool(np.max(np.abs(self._probs - other._probs)) <= atol)

    def support(self) -> "SupportSet":
        return SupportSet(np.flatnonzero(self._probs > 0).tolist())


@dataclass(frozen=True)
class SupportSet:
    """Sorted set of token ids."""

    members: tuple[int, ...]

    def __init__(self, members: Iterable[int]):
        object.__setattr__(self, "members", tuple(sorted({int(m) for m in members})))
        if any(m < 0 for m in self.members):
            raise ValueError("token ids are non-negative")

    def __contains__(self, token) -> bool:
        return int(token) in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def mask(self, n: int) -> np.ndarray:
        if self.members and self.members[-1] >= n:
            raise ValueError(f"support {self.members} exceeds vocabulary size {n}")
        m = np.zeros(n, dtype=bool)
        m[list(self.members)] = True
        return m

    def complement(self, n: int) -> "SupportSet":
        return SupportSet(np.flatnonzero(~self.mask(n)).tolist())


def as_dist(d) -> TokenDist:
    return d if isinstance(d, TokenDist) else TokenDist(d)


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p, q = as_dist(p), as_dist(q)
    if p.n != q.n:
        raise DimensionMismatch(f"vocabulary sizes differ: {p.n} vs {q.n}")
    return p.probs, q.probs


def overlap(p, q) -> float:
    """Sum of ``min(p_i, q_i)``."""
    a, b = _check_pair(p, q)
    return float(np.minimum(a, b).sum())


def tv_distance(p, q) -> float:
    """Total variation distance ``1 - sum(min(p, q))``."""
    a, b = _check_pair(p, q)
    return float(min(1.0, max(0.0, 0.5 * np.abs(a - b).sum())))


def residual_dist(p, q) -> TokenDist:
    """Normalized positive part of ``q - min(p, q)``.

    Raises DegenerateResidual when ``p`` and ``q`` coincide, in which case
    a speculative step accepts with certainty and no residual is needed.
    """
    a, b = _check_pair(p, q)
    r = b - np.minimum(a, b)
    mass = r.sum()
    if mass <= RESIDUAL_FLOOR:
        raise DegenerateResidual("degenerate residual: p equals q")
    return TokenDist(r / mass)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over ascending token id for a uniform ``u``."""
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if i >= probs.size:
        # u at the top of the cdf after rounding: last token with mass
        i = int(np.flatnonzero(probs > 0)[-1])
    return i


def _ranked(probs: np.ndarray) -> np.ndarray:
    # descending probability, ties by ascending id
    return np.lexsort((np.arange(probs.size), -probs))


def _restrict(probs: np.ndarray, keep: np.ndarray) -> tuple[SupportSet, TokenDist]:
    mask = np.zeros(probs.size, dtype=bool)
    mask[keep] = True
    out = np.where(mask, probs, 0.0)
    return SupportSet(keep.tolist()), TokenDist(out / out.sum())


def top_p_truncate(d, mass: float) -> tuple[SupportSet, TokenDist]:
    """Smallest high-probability prefix with mass at least ``mass``."""
    if not 0.0 < mass <= 1.0:
        raise ValueError("mass must lie in (0, 1]")
    probs = as_dist(d).probs
    order = _ranked(probs)
    cum = np.cumsum(probs[order])
    k = int(np.searchsorted(cum, mass - 1e-12, side="left")) + 1
    return _restrict(probs, order[: min(k, probs.size)])


def top_k_truncate(d, k: int) -> tuple[SupportSet, TokenDist]:
    if k < 1:
        raise ValueError("k must be positive")
    probs = as_dist(d).probs
    order = _ranked(probs)
    return _restrict(probs, order[: min(k, probs.size)])


def temperature_tilt(d, T: float) -> TokenDist:
    """Distribution proportional to ``d ** (1/T)``; zeros stay zero."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    probs = as_dist(d).probs
    if T == 1.0:
        return as_dist(d)
    pos = probs > 0
    logp = np.full(probs.size, -np.inf)
    logp[pos] = np.log(probs[pos]) / T
    out = np.zeros(probs.size)
    out[pos] = np.exp(logp[pos] - logp[pos].max())
    return TokenDist(out / out.sum())


def effective_alphabet_size(d, mass: float = 0.95) -> int:
    return len(top_p_truncate(d, mass)[0])


RECORD_FIELDS = (("p", "q"), ("p1", "p2", "q"))


def parse_records(text: str, source: str = "<input>") -> list[dict[str, TokenDist]]:
    """Parse the JSON ingestion format.

    The document is an array of records, each either ``{"p", "q"}`` or
    ``{"p1", "p2", "q"}``; all vectors in a record share one length.
    Whitespace-only input is an empty list.
    """
    if not text.strip():
        return []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise IngestError(f"{source}: top level must be an array of records")
    out = []
    for idx, rec in enumerate(raw):
        if not isinstance(rec, dict) or tuple(sorted(rec)) not in {tuple(sorted(f)) for f in RECORD_FIELDS}:
            keys = sorted(rec) if isinstance(rec, dict) else type(rec).__name__
            raise IngestError(f"{source}: record {idx}: expected keys p,q or p1,p2,q, got {keys}")
        lengths = {len(v) if isinstance(v, list) else -1 for v in rec.values()}
        if len(lengths) != 1 or -1 in lengths:
            raise IngestError(f"{source}: record {idx}: vectors must be lists of equal length")
        try:
            out.append({k: TokenDist(v) for k, v in rec.items()})
        except (TypeError, ValueError) as exc:
            raise IngestError(f"{source}: record {idx}: {exc}") from exc
    return out


def load_records(path: str | Path) -> list[dict[str, TokenDist]]:
    path = Path(path)
    return parse_records(path.read_text(), source=str(path))
