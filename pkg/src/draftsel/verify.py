"""Seeded verification suites comparing schemes, LPs and closed forms.

Each suite returns a ``SuiteResult``.  Gating suites pass or fail; the
conjecture suite only reports.
"""

from __future__ import annotations

import itertools
import json
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import lp, theory
from .prob import TokenDist
from .selection import (
    BetaRule,
    MultiStagePair,
    SingleDraft,
    SpecInfer,
    SpecTr,
    TruncatedAlphabet,
    TwoStepIS,
    exact_output_dist,
)
from .sim import FAMILIES, gen_random_instance
from .weights import OrderedWeightMatrix, WeightMatrix

LP_TOL = 1e-9
VALIDITY_TOL = 1e-12

# distinct stream tags per suite so suites never share instances
_TAGS = {"validity": 11, "thm2": 12, "thm3": 13, "bound": 14, "noniid": 15, "conjecture": 16}


@dataclass
class SuiteResult:
    name: str
    passed: bool
    instances: int
    metrics: dict = field(default_factory=dict)
    gating: bool = True

    @property
    def status(self) -> str:
        if not self.gating:
            return "INFO"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        parts = [f"{k}={_fmt(v)}" for k, v in sorted(self.metrics.items())]
        return " ".join([f"{self.name}:", self.status, f"instances={self.instances}"] + parts)

    def to_dict(self) -> dict:
        return {"suite": self.name, "status": self.status, "instances": self.instances, **self.metrics}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _inst(suite: str, seed: int, i: int, n: int, family: str | None = None, **kw):
    family = family or FAMILIES[i % len(FAMILIES)]
    return gen_random_instance([seed, _TAGS[suite], i], n, family, **kw)


def _rng(suite: str, seed: int, i: int):
    return np.random.default_rng([seed, _TAGS[suite], i, 1])


def random_beta_rule(rng, n: int, K: int) -> BetaRule:
    table = {}
    for x in itertools.combinations_with_replacement(range(n), K):
        ys = sorted(set(x))
        w = rng.dirichlet(np.ones(len(ys)))
        table[x] = dict(zip(ys, w.tolist()))
    return BetaRule(K, table, symmetric=True)


def validity_cases(rng, n: int, p, p1, p2, p3):
    """Every scheme variant paired with a draft list it accepts."""
    s = int(rng.integers(1, n + 1))
    yield "single", SingleDraft(), [p]
    yield "is-fixed", TwoStepIS("fixed", rule=WeightMatrix(rng.uniform(size=(n, n)))), [p, p]
    yield "is-fixed-ordered", TwoStepIS("fixed", rule=OrderedWeightMatrix(rng.uniform(size=(n, n)))), [p1, p2]
    yield "is-fixed-beta", TwoStepIS("fixed", rule=random_beta_rule(rng, n, 3)), [p, p, p]
    yield "is-symmetric", TwoStepIS("symmetric"), [p, p, p]
    yield "is-lp", TwoStepIS("lp"), [p, p]
    yield "is-lp-noniid", TwoStepIS("lp"), [p1, p2]
    if n <= 4:
        yield "is-beta-k3", TwoStepIS("beta"), [p, p, p]
    yield "is-truncated", TwoStepIS("truncated", s=s), [p, p]
    yield "is-truncated-noniid", TwoStepIS("truncated", s=s), [p1, p2]
    yield "is-fast", TwoStepIS("fast", s=s), [p, p]
    yield "trunc-alpha", TruncatedAlphabet(TwoStepIS("lp"), top_p=0.8), [p, p]
    yield "trunc-alpha-specinfer", TruncatedAlphabet(SpecInfer(), top_k=max(1, n - 1)), [p1, p2]
    yield "specinfer", SpecInfer(), [p1, p2, p3]
    yield "spectr", SpecTr(), [p, p, p]
    yield "multistage", MultiStagePair("lp"), [p, p, p]
    yield "multistage-noniid", MultiStagePair("lp"), [p1, p2, p3]
    yield "multistage-truncated", MultiStagePair("truncated", s=s), [p, p, p]


def suite_validity(count: int = 100, seed: int = 0) -> SuiteResult:
    """Exact output law of every scheme against the target."""
    worst: dict[str, float] = {}
    for i in range(count):
        n = 2 + i % 5
        a = _inst("validity", seed, i, n, K=3, identical=False)
        b = _inst("validity", seed, i + count, n, K=1)
        q, p = a.q, b.p
        p1, p2, p3 = a.drafts
        for name, scheme, drafts in validity_cases(_rng("validity", seed, i), n, p, p1, p2, p3):
            dev = float(np.abs(exact_output_dist(scheme, drafts, q).probs - q.probs).max())
            worst[name] = max(worst.get(name, 0.0), dev)
    max_dev = max(worst.values(), default=0.0)
    return SuiteResult("validity", max_dev <= VALIDITY_TOL, count, {"max_dev": max_dev, "schemes": len(worst)})


def boundary_instance(rng, n: int) -> tuple[TokenDist, TokenDist, tuple[int, ...]]:
    """Target with ``q(S) = p(S)^2`` on a random proper subset ``S``.

    Inside ``S`` the target is ``p(S) p``; outside it is ``(1 + p(S)) p``,
    which keeps the total mass at one.
    """
    p = rng.dirichlet(np.ones(n))
    k = int(rng.integers(1, n))
    S = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
    mask = np.zeros(n, dtype=bool)
    mask[list(S)] = True
    pS = p[mask].sum()
    q = np.where(mask, pS * p, (1.0 + pS) * p)
    return TokenDist(p), TokenDist(q / q.sum()), S


def two_token_grid(points: int = 101) -> list[tuple[float, float, bool]]:
    """``(q1, optimum, condition)`` for ``p = (0.5, 0.5)`` on an even grid of ``q1``."""
    rows = []
    for q1 in np.linspace(0.0, 1.0, points):
        q = [q1, 1.0 - q1]
        rows.append((float(q1), lp.optimal_accept_prob([0.5, 0.5], q, 2), theory.thm2_condition([0.5, 0.5], q)[0]))
    return rows


def suite_thm2(count: int = 500, seed: int = 0, boundary: int | None = None) -> SuiteResult:
    """LP attains acceptance one exactly when every subset satisfies the square condition."""
    boundary = count // 4 if boundary is None else boundary
    disagree = ones = 0
    for i in range(count + boundary):
        n = 2 + i % 7
        if i < count:
            inst = _inst("thm2", seed, i, n, K=1)
            p, q = inst.p, inst.q
        else:
            p, q, _ = boundary_instance(_rng("thm2", seed, i), n)
        one = lp.feasibility_accepts_one(p, q, 2)
        ones += one
        disagree += one != theory.thm2_condition(p, q)[0]
    grid_bad = sum((abs(1.0 - v) <= lp.ONE_TOL) != (0.25 <= q1 <= 0.75) for q1, v, _ in two_token_grid())
    return SuiteResult(
        "thm2",
        disagree == 0 and grid_bad == 0,
        count + boundary,
        {"disagreements": disagree, "accept_one": ones, "boundary": boundary, "two_token_mismatches": grid_bad},
    )


def suite_thm3(count: int = 200, seed: int = 0, n_max: int = 8) -> SuiteResult:
    """Subset formula against the pair LP and the full beta LP."""
    dev_w = dev_beta = 0.0
    for i in range(count):
        n = 2 + i % (n_max - 1)
        inst = _inst("thm3", seed, i, n, K=1)
        p, q = inst.p, inst.q
        t, _ = theory.thm3_accept_prob(p, q)
        dev_w = max(dev_w, abs(t - lp.optimal_accept_prob(p, q, 2)))
        dev_beta = max(dev_beta, abs(t - lp.optimal_accept_prob(p, q, 2, method="beta")))
    return SuiteResult(
        "thm3",
        max(dev_w, dev_beta) <= LP_TOL,
        count,
        {"max_dev_w_lp": dev_w, "max_dev_beta_lp": dev_beta},
    )


def truncated_accept(p, q, s: int, fast: bool = False) -> tuple[float, list[int]]:
    """Acceptance of the truncated rule over the whole alphabet, and its kept tokens."""
    build = lp.build_fast_truncated_variant if fast else lp.build_truncated_w_lp
    problem, _ = build(p, q, s)
    w = lp.weights_from_solution(problem, lp._checked(problem))
    pI = w.selected_dist(p).probs
    return float(np.minimum(pI, TokenDist(q).probs).sum()), problem.meta["omega1"]


def suite_bound(count: int = 100, seed: int = 0) -> SuiteResult:
    """Truncated LPs stay between the optimum and the optimum minus the dropped-token penalty."""
    metrics = {}
    passed = True
    for label, fast in (("ranked", False), ("fast", True)):
        below = above = nonmono = 0
        worst_gap = 0.0
        for i in range(count):
            n = 2 + i % 7
            inst = _inst("bound", seed, i, n, K=1)
            p, q = inst.p, inst.q
            best = lp.optimal_accept_prob(p, q, 2)
            prev = -np.inf
            for s in range(1, n + 1):
                got, omega1 = truncated_accept(p, q, s, fast)
                omega2 = [t for t in range(n) if t not in set(omega1)]
                floor = best - theory.truncation_penalty(p, q, omega2)
                below += got < floor - LP_TOL
                above += got > best + LP_TOL
                nonmono += got < prev - LP_TOL
                worst_gap = max(worst_gap, best - got)
                prev = got
        metrics[f"{label}_bound_violations"] = below
        metrics[f"{label}_above_optimum"] = above
        metrics[f"{label}_non_monotone"] = nonmono
        metrics[f"{label}_max_gap"] = worst_gap
        # only the sorted variant is monotone in s; the fast one is reported
        passed &= below == 0 and above == 0 and (fast or nonmono == 0)
    return SuiteResult("bound", passed, count, metrics)


def suite_noniid(count: int = 100, seed: int = 0, n_max: int = 6) -> SuiteResult:
    """Ordered pair LP against the full beta LP on the product law, and its identical-draft reduction."""
    dev = red = 0.0
    for i in range(count):
        n = 2 + i % (n_max - 1)
        inst = _inst("noniid", seed, i, n, K=2, identical=False)
        p1, p2 = inst.drafts
        q = inst.q
        pair = lp._checked(lp.build_noniid_w_lp_k2(p1, p2, q)).objective
        full = lp.optimal_accept_prob([p1, p2], q, method="beta")
        dev = max(dev, abs(pair - full))
        same = lp._checked(lp.build_noniid_w_lp_k2(p1, p1, q)).objective
        red = max(red, abs(same - lp.optimal_accept_prob(p1, q, 2)))
    return SuiteResult("noniid", max(dev, red) <= LP_TOL, count, {"max_dev": dev, "max_reduction_dev": red})


def _mixed_pairs(seed: int, n: int):
    inst = gen_random_instance([seed, _TAGS["conjecture"]], n, FAMILIES[seed % len(FAMILIES)], K=1)
    return inst.p, inst.q


def suite_conjecture(count: int = 200, seed: int = 0, K: int = 3, n_max: int = 4) -> SuiteResult:
    """K-draft subset formula against the beta LP; informational only."""
    report = theory.verify_conjecture_harness(
        lambda s, n: _mixed_pairs(s, n), [K], range(2, n_max + 1), count, seed
    )
    return SuiteResult(
        "conjecture",
        True,
        count,
        {
            "max_dev": report.max_deviation,
            "condition_agree": report.agreements,
            "condition_disagree": report.disagreements,
            "boundary": sum(r.boundary for r in report.rows),
        },
        gating=False,
    )


SUITES = {
    "validity": suite_validity,
    "thm2": suite_thm2,
    "thm3": suite_thm3,
    "bound": suite_bound,
    "noniid": suite_noniid,
    "conjecture": suite_conjecture,
}


@contextmanager
def tolerances(lp_tol: float | None = None, validity_tol: float | None = None):
    """Temporarily override the agreement and validity tolerances."""
    global LP_TOL, VALIDITY_TOL
    saved = LP_TOL, VALIDITY_TOL
    if lp_tol is not None:
        LP_TOL = lp_tol
    if validity_tol is not None:
        VALIDITY_TOL = validity_tol
    try:
        yield
    finally:
        LP_TOL, VALIDITY_TOL = saved


def run_suites(names, count: int | None = None, seed: int = 0) -> list[SuiteResult]:
    if "all" in names:
        names = list(SUITES)
    out = []
    for name in names:
        fn = SUITES[name]
        out.append(fn(seed=seed) if count is None else fn(count=count, seed=seed))
    return out


def report_text(results: list[SuiteResult]) -> str:
    return "".join(r.line() + "\n" for r in results)


def report_json(results: list[SuiteResult]) -> str:
    return json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True) + "\n"
