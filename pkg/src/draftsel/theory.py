"""Closed-form acceptance results for identical drafts, checked by subset enumeration."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .lp import GuardExceeded, ONE_TOL, optimal_accept_prob
from .prob import SupportSet, _check_pair

MAX_N = 24
SLACK = 1e-12


@dataclass(frozen=True)
class SubsetCertificate:
    subset: SupportSet
    value: float


def subset_sums(v: np.ndarray) -> np.ndarray:
    """Sum of ``v`` over every subset; entry ``mask`` covers the tokens whose bits are set."""
    if v.size > MAX_N:
        raise GuardExceeded(f"subset enumeration limited to n <= {MAX_N}, got {v.size}")
    sums = np.zeros(1)
    for x in v:
        sums = np.concatenate([sums, sums + x])
    return sums


def _subset(mask: int, n: int) -> SupportSet:
    return SupportSet(i for i in range(n) if mask >> i & 1)


def _pick(values: np.ndarray, n: int, among: np.ndarray | None = None) -> int:
    # smallest value; ties by larger subset, then lower mask
    if among is None:
        among = np.arange(values.size)
    v = values[among]
    near = among[v <= v.min() + SLACK]
    sizes = np.array([bin(int(m)).count("1") for m in near])
    return int(near[sizes == sizes.max()].min())


def _sums(p, q):
    a, b = _check_pair(p, q)
    return a.size, subset_sums(a), subset_sums(b)


def thm2_condition(p, q) -> tuple[bool, SubsetCertificate | None]:
    """Acceptance one with two identical drafts iff ``q(S) >= p(S)^2`` for every subset.

    On failure the most violated subset is returned with ``q(S) - p(S)^2``.
    """
    return conjecture_condition_k(p, q, 2, certificate=True)


def thm3_accept_prob(p, q) -> tuple[float, SubsetCertificate]:
    """Optimal two-draft acceptance as a minimum over token subsets.

    Both equivalent subset expressions are evaluated and must agree.
    """
    n, ps, qs = _sums(p, q)
    pc = ps[::-1]  # complement of mask m is mask (2^n - 1 - m)
    full = qs + pc * pc + 2.0 * ps * pc
    short = qs - ps * ps + 1.0
    gap = float(np.max(np.abs(full - short)))
    if gap > 1e-12:
        raise ArithmeticError(f"subset forms disagree by {gap:.3e}")
    m = _pick(full, n)
    return float(min(1.0, full[m])), SubsetCertificate(_subset(m, n), float(full[m]))


def conjecture_accept_prob(p, q, K: int) -> float:
    """Minimum over subsets of ``q(S) - p(S)^K + 1``; proven only for ``K <= 2``."""
    if K < 1:
        raise ValueError("K must be positive")
    _, ps, qs = _sums(p, q)
    return float(min(1.0, np.min(qs - ps**K + 1.0)))


def conjecture_condition_k(p, q, K: int, certificate: bool = False):
    """Whether ``q(S) >= p(S)^K`` holds on every proper subset (with ``-1e-12`` slack)."""
    n, ps, qs = _sums(p, q)
    gap = qs - ps**K
    proper = np.arange(gap.size - 1)
    ok = bool(np.all(gap[proper] >= -SLACK))
    if not certificate:
        return ok
    if ok:
        return True, None
    m = _pick(gap, n, proper)
    return False, SubsetCertificate(_subset(m, n), float(gap[m]))


def truncation_penalty(p, q, omega2: Iterable[int]) -> float:
    """Sum over ``omega2`` of ``max(0, q - p^2)``."""
    a, b = _check_pair(p, q)
    idx = list(SupportSet(omega2))
    if not idx:
        return 0.0
    return float(np.maximum(0.0, b[idx] - a[idx] ** 2).sum())


def boundary_gap(p, q, K: int) -> float:
    """Smallest ``q(S) - p(S)^K`` over nonempty proper subsets (zero on the boundary)."""
    _, ps, qs = _sums(p, q)
    gap = (qs - ps**K)[1:-1]
    return float(gap.min()) if gap.size else np.inf


@dataclass
class HarnessRow:
    instance: int
    n: int
    K: int
    lp_value: float
    formula_value: float
    delta: float
    condition_agrees: bool
    boundary: bool


@dataclass
class HarnessReport:
    rows: list[HarnessRow] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((abs(r.delta) for r in self.rows), default=0.0)

    @property
    def agreements(self) -> int:
        return sum(r.condition_agrees for r in self.rows)

    @property
    def disagreements(self) -> int:
        return len(self.rows) - self.agreements

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "n", "K", "lp_value", "formula_value", "delta", "condition_agrees", "boundary"])
        for r in self.rows:
            w.writerow(
                [r.instance, r.n, r.K, f"{r.lp_value:.12g}", f"{r.formula_value:.12g}", f"{r.delta:.6e}",
                 int(r.condition_agrees), int(r.boundary)]
            )
        return buf.getvalue()

    def summary(self) -> str:
        return (
            f"instances={len(self.rows)} max_dev={self.max_deviation:.3e} "
            f"condition_agree={self.agreements} condition_disagree={self.disagreements}"
        )


def verify_conjecture_harness(
    generator: Callable[[int, int], tuple],
    K_values: Iterable[int],
    n_values: Iterable[int],
    count: int,
    seed: int = 0,
) -> HarnessReport:
    """Compare LP optima with the subset formula on generated instances.

    ``generator(seed, n)`` returns ``(p, q)``.  Instances cycle through the
    ``(K, n)`` grid; the report records deviations and never asserts.
    """
    grid = [(K, n) for K in K_values for n in n_values]
    report = HarnessReport()
    for i in range(count):
        K, n = grid[i % len(grid)]
        p, q = generator(seed * 1_000_003 + i, n)
        lp_value = optimal_accept_prob(p, q, K)
        formula = conjecture_accept_prob(p, q, K)
        lp_one = abs(1.0 - lp_value) <= ONE_TOL
        report.rows.append(
            HarnessRow(
                instance=i,
                n=n,
                K=K,
                lp_value=lp_value,
                formula_value=formula,
                delta=lp_value - formula,
                condition_agrees=lp_one == conjecture_condition_k(p, q, K),
                boundary=abs(boundary_gap(p, q, K)) <= 1e-9,
            )
        )
    return report
