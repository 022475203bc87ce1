"""Token-level selection rules for K draft tokens.

A scheme descriptor (``SingleDraft``, ``TwoStepIS``, ``SpecInfer``,
``SpecTr``, ``TruncatedAlphabet``, ``MultiStagePair``) is bound to a concrete
draft/target instance with ``scheme.bind(drafts, q)``.  The bound object
samples (``select``) and exposes the conditional output law for any input
tuple (``branch_law``), which the enumeration oracles below sum over.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import lp
from .prob import DegenerateResidual, DimensionMismatch, SupportSet, TokenDist, as_dist, residual_dist, sample_index
from .prob import top_k_truncate, top_p_truncate
from .specsample import accept_ratio, transition_matrix
from .weights import OrderedWeightMatrix, WeightMatrix

MAX_TUPLES = 10**6
OVERFILL_TOL = 1e-15


class Selection(NamedTuple):
    token: int
    accepted: bool
    index: int | None = None


def as_drafts(drafts, K: int | None = None) -> list[TokenDist]:
    """Normalize ``drafts`` to a list of K distributions.

    A single distribution with ``K`` means K identical drafts.
    """
    if isinstance(drafts, TokenDist) or (np.ndim(drafts) == 1 and len(drafts) and np.isscalar(drafts[0])):
        if K is None:
            raise ValueError("K is required with a single draft distribution")
        return [as_dist(drafts)] * K
    out = [as_dist(d) for d in drafts]
    if not out:
        raise ValueError("at least one draft is required")
    if K is not None and len(out) != K:
        raise DimensionMismatch(f"expected {K} drafts, got {len(out)}")
    if any(d.n != out[0].n for d in out):
        raise DimensionMismatch("drafts differ in vocabulary size")
    return out


def identical(drafts: Sequence[TokenDist]) -> bool:
    return all(np.array_equal(drafts[0].probs, d.probs) for d in drafts[1:])


# -- beta rules ---------------------------------------------------------------


@dataclass(frozen=True)
class BetaRule:
    """Selection probabilities ``beta_y(x_1..x_K)`` keyed by input tuple.

    With ``symmetric=True`` keys are sorted tuples and lookups sort the
    input first.  Tuples absent from the table select uniformly among
    their distinct tokens.
    """

    K: int
    table: Mapping[tuple[int, ...], Mapping[int, float]]
    symmetric: bool = False

    def __post_init__(self):
        for x, row in self.table.items():
            if len(x) != self.K or any(y not in x for y in row):
                raise ValueError(f"beta for tuple {x} selects outside the tuple")
            if any(v < 0 for v in row.values()) or abs(sum(row.values()) - 1.0) > 1e-9:
                raise ValueError(f"beta for tuple {x} is not a distribution")

    @classmethod
    def from_lp(cls, problem: lp.LpProblem, sol: lp.LpSolution, symmetric: bool = False) -> "BetaRule":
        rule = lp.beta_from_solution(problem, sol)
        K = problem.meta["K"]
        if not symmetric:
            return cls(K, rule)
        # identical drafts: tuples sharing a sorted key are equally likely
        groups: dict[tuple[int, ...], list[Mapping[int, float]]] = {}
        for x, row in rule.items():
            groups.setdefault(tuple(sorted(x)), []).append(row)
        table = {}
        for key, rows in groups.items():
            acc: dict[int, float] = {}
            for row in rows:
                for y, v in row.items():
                    acc[y] = acc.get(y, 0.0) + v / len(rows)
            table[key] = acc
        return cls(K, table, symmetric=True)

    @classmethod
    def uniform_index(cls, K: int) -> "BetaRule":
        """Pick one of the K positions uniformly; reproduces the draft law for identical drafts."""
        return cls(K, {}, symmetric=True)

    def row(self, x: Sequence[int]) -> dict[int, float]:
        key = tuple(sorted(x)) if self.symmetric else tuple(x)
        got = self.table.get(key)
        if got is not None:
            return dict(got)
        counts: dict[int, float] = {}
        for y in x:
            counts[int(y)] = counts.get(int(y), 0.0) + 1.0 / len(x)
        return counts


# -- intermediate-token choosers ---------------------------------------------


class _Chooser:
    def law(self, x: Sequence[int], n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, x: Sequence[int], rng) -> int:
        raise NotImplementedError

    def intermediate(self, drafts: list[TokenDist]) -> TokenDist:
        raise NotImplementedError


class _FirstToken(_Chooser):
    def law(self, x, n):
        v = np.zeros(n)
        v[x[0]] = 1.0
        return v

    def sample(self, x, rng):
        return int(x[0])

    def intermediate(self, drafts):
        return drafts[0]


class _PairChooser(_Chooser):
    def __init__(self, w: WeightMatrix | OrderedWeightMatrix):
        self.w = w
        self.F = w.first_prob()

    def law(self, x, n):
        a, b = x
        v = np.zeros(n)
        v[a] += self.F[a, b]
        v[b] += 1.0 - self.F[a, b]
        return v

    def sample(self, x, rng):
        return self.w.choose(x[0], x[1], rng.random())

    def intermediate(self, drafts):
        if isinstance(self.w, WeightMatrix) and identical(drafts):
            return self.w.selected_dist(drafts[0])
        return TokenDist(_pair_dist(drafts[0].probs, drafts[1].probs, self.F))


class _BetaChooser(_Chooser):
    def __init__(self, rule: BetaRule):
        self.rule = rule

    def law(self, x, n):
        v = np.zeros(n)
        for y, b in self.rule.row(x).items():
            v[y] += b
        return v

    def sample(self, x, rng):
        row = sorted(self.rule.row(x).items())
        probs = np.array([b for _, b in row])
        return int(row[sample_index(probs, rng.random())][0])

    def intermediate(self, drafts):
        n = drafts[0].n
        J = lp.joint_law(drafts)
        out = np.zeros(n)
        for x in itertools.product(range(n), repeat=len(drafts)):
            if J[x] > 0:
                out += J[x] * self.law(x, n)
        return TokenDist(out)


class _StagedChooser(_Chooser):
    """Left fold of pair rules: stage t pairs the running token with draft t+1."""

    def __init__(self, stages: list[WeightMatrix | OrderedWeightMatrix]):
        self.stages = stages
        self.F = [w.first_prob() for w in stages]

    def law(self, x, n):
        v = np.zeros(n)
        v[x[0]] = 1.0
        for F, nxt in zip(self.F, x[1:]):
            stay = v * F[:, nxt]
            stay[nxt] += float(v @ (1.0 - F[:, nxt]))
            # pairs (y, y) keep y: F[y, y] == 1 so the line above adds nothing for y == nxt
            v = stay
        return v

    def sample(self, x, rng):
        y = int(x[0])
        for w, nxt in zip(self.stages, x[1:]):
            y = w.choose(y, int(nxt), rng.random())
        return y

    def intermediate(self, drafts):
        law = drafts[0].probs
        for F, d in zip(self.F, drafts[1:]):
            law = _pair_dist(law, d.probs, F)
        return TokenDist(law)


def _pair_dist(p1: np.ndarray, p2: np.ndarray, F: np.ndarray) -> np.ndarray:
    P = np.outer(p1, p2)
    return (P * F).sum(axis=1) + (P * (1.0 - F)).sum(axis=0)


# -- bound schemes ------------------------------------------------------------


class BoundScheme:
    """A scheme specialized to one (drafts, q) instance."""

    name = "scheme"

    def __init__(self, drafts: list[TokenDist], q: TokenDist):
        self.drafts = drafts
        self.q = q
        self.K = len(drafts)
        self.n = q.n

    def select(self, tokens: Sequence[int], rng) -> Selection:
        raise NotImplementedError

    def branch_law(self, tokens: Sequence[int]) -> tuple[np.ndarray, float]:
        """Output law and acceptance probability conditioned on the input tuple."""
        raise NotImplementedError

    def accept_prob(self) -> float:
        """Closed-form acceptance probability."""
        raise NotImplementedError


class BoundTwoStep(BoundScheme):
    def __init__(self, drafts, q, chooser: _Chooser, name: str = "two-step"):
        super().__init__(drafts, q)
        self.chooser = chooser
        self.name = name
        self.intermediate = chooser.intermediate(drafts)
        self.M, self.beta = transition_matrix(self.intermediate, q)
        try:
            self.residual = residual_dist(self.intermediate, q).probs
        except DegenerateResidual:
            self.residual = None

    def select(self, tokens, rng):
        # same draws as spec_sample_step, without re-deriving the residual per call
        y = self.chooser.sample(tokens, rng)
        if self.intermediate.probs[y] <= 0.0:
            raise ValueError(f"draft token {y} outside draft support")
        if rng.random() < self.beta[y] or self.residual is None:
            # first draft holding the chosen token
            return Selection(y, True, [int(t) for t in tokens].index(y))
        return Selection(sample_index(self.residual, rng.random()), False)

    def branch_law(self, tokens):
        law = self.chooser.law(tokens, self.n)
        return law @ self.M, float(law @ self.beta)

    def accept_prob(self):
        return float(np.minimum(self.intermediate.probs, self.q.probs).sum())


class _Sequential(BoundScheme):
    """Shared sampling path for the recursive-rejection baselines."""

    def __init__(self, drafts, q, betas: list[np.ndarray], final: np.ndarray | None):
        super().__init__(drafts, q)
        self.betas = betas
        self.final = final

    def select(self, tokens, rng):
        for k, (x, beta) in enumerate(zip(tokens, self.betas)):
            if rng.random() < beta[x]:
                return Selection(int(x), True, k)
        if self.final is None:
            # unreachable for tokens drawn from the drafts
            return Selection(int(tokens[-1]), True, self.K - 1)
        return Selection(sample_index(self.final, rng.random()), False, None)

    def branch_law(self, tokens):
        out = np.zeros(self.n)
        reach = 1.0
        for x, beta in zip(tokens, self.betas):
            a = beta[x]
            out[x] += reach * a
            reach *= 1.0 - a
        if reach > 0.0 and self.final is not None:
            out += reach * self.final
        return out, 1.0 - reach


class BoundSpecInfer(_Sequential):
    name = "specinfer"

    def __init__(self, drafts, q):
        r = q.probs
        betas, self.stage_accept = [], []
        final = r
        for d in drafts:
            beta = accept_ratio(d.probs, r)
            self.stage_accept.append(float(np.minimum(d.probs, r).sum()))
            try:
                r = residual_dist(d.probs, r).probs
            except DegenerateResidual:
                beta = np.where(d.probs > 0, 1.0, beta)
                betas.append(beta)
                self.stage_accept[-1] = 1.0
                final = None
                break
            betas.append(beta)
            final = r
        # drafts after a certain acceptance are never consulted
        while len(betas) < len(drafts):
            betas.append(np.ones(q.n))
            self.stage_accept.append(1.0)
        super().__init__(drafts, q, betas, final)

    def accept_prob(self):
        return 1.0 - float(np.prod([1.0 - a for a in self.stage_accept]))


class BoundSpecTr(_Sequential):
    name = "spectr"

    def __init__(self, drafts, q, bisect_tol: float = 1e-10):
        if not identical(drafts):
            raise ValueError("SpecTr is defined for identical drafts only")
        p, qq = drafts[0].probs, q.probs
        K = len(drafts)
        self.c = spectr_constant(p, qq, K, bisect_tol)
        beta, measure, self.rho = _spectr_measure(p, qq, K, self.c)
        left = qq - measure
        leftover = 1.0 - measure.sum()
        final = None
        if leftover > 1e-15:
            final = np.maximum(left, 0.0)
            final = final / final.sum()
        super().__init__(drafts, q, [beta] * K, final)

    def accept_prob(self):
        return 1.0 - (1.0 - self.rho) ** self.K


def _spectr_measure(p, q, K, c):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        beta = np.where(p > 0, np.minimum(1.0, q / (c * np.where(p > 0, p, 1.0))), 0.0)
    rho = float(p @ beta)
    g = sum((1.0 - rho) ** k for k in range(K))
    return beta, p * beta * g, rho


def spectr_constant(p, q, K: int, tol: float = 1e-10) -> float:
    """Smallest ``c >= 1`` (to ``tol``) whose sequential accepted mass stays below ``q``."""
    p, q = as_dist(p).probs, as_dist(q).probs

    def ok(c):
        return bool(np.all(_spectr_measure(p, q, K, c)[1] <= q + OVERFILL_TOL))

    if ok(1.0):
        return 1.0
    lo, hi = 1.0, float(K)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


class BoundTruncatedAlphabet(BoundScheme):
    def __init__(self, drafts, q, inner: "Scheme", omega0: SupportSet):
        super().__init__(drafts, q)
        mask = omega0.mask(q.n)
        qq = q.probs
        self.keep = float(qq[mask].sum())
        if self.keep <= 0.0:
            raise ValueError("target has no mass on the truncated alphabet")
        self.omega0 = omega0
        self.q_trunc = TokenDist(np.where(mask, qq, 0.0) / self.keep)
        self.inner = inner.bind(drafts, self.q_trunc)
        self.name = f"trunc-alpha({self.inner.name})"
        rest = np.where(mask, 0.0, qq)
        self.outside = rest / rest.sum() if self.keep < 1.0 and rest.sum() > 0 else None

    def select(self, tokens, rng):
        sel = self.inner.select(tokens, rng)
        if rng.random() < self.keep or self.outside is None:
            return sel
        return Selection(sample_index(self.outside, rng.random()), False, None)

    def branch_law(self, tokens):
        out, acc = self.inner.branch_law(tokens)
        if self.outside is None:
            return out, acc
        return self.keep * out + (1.0 - self.keep) * self.outside, self.keep * acc

    def accept_prob(self):
        return self.keep * self.inner.accept_prob()


# -- scheme descriptors ---------------------------------------------------------


class Scheme:
    name = "scheme"

    def bind(self, drafts, q) -> BoundScheme:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SingleDraft(Scheme):
    """Plain speculative sampling on the first draft token."""

    name = "single"

    def bind(self, drafts, q):
        drafts = as_drafts(drafts)
        return BoundTwoStep(drafts[:1], as_dist(q), _FirstToken(), name="single")

    def to_dict(self):
        return {"scheme": "single"}


WEIGHT_MODES = ("lp", "beta", "truncated", "fast", "symmetric", "fixed")


@dataclass(frozen=True)
class TwoStepIS(Scheme):
    """Importance weighted selection of one draft token, then speculative sampling.

    ``weights`` picks how the first-stage rule is obtained: ``lp`` (optimal
    pair LP for two drafts, full beta LP beyond), ``beta`` (always the full
    beta LP), ``truncated`` / ``fast`` (truncated LPs with parameter ``s``),
    ``symmetric`` (uniform over positions) or ``fixed`` (``rule`` supplied).
    """

    weights: str = "lp"
    s: int | None = None
    rule: WeightMatrix | OrderedWeightMatrix | BetaRule | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.weights not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.weights!r}")
        if self.weights in ("truncated", "fast") and self.s is None:
            raise ValueError(f"weight mode {self.weights!r} needs s")
        if self.weights == "fixed" and self.rule is None:
            raise ValueError("fixed weights need a rule")

    @property
    def name(self):
        if self.weights in ("truncated", "fast"):
            return f"is-{self.weights}(s={self.s})"
        return f"is-{self.weights}"

    def chooser(self, drafts: list[TokenDist], q: TokenDist) -> _Chooser:
        K = len(drafts)
        if K == 1:
            return _FirstToken()
        same = identical(drafts)
        mode = self.weights
        if mode == "fixed":
            if isinstance(self.rule, BetaRule):
                return _BetaChooser(self.rule)
            if K != 2:
                raise ValueError("pair weights need exactly two drafts")
            return _PairChooser(self.rule)
        if mode == "symmetric":
            if K == 2:
                return _PairChooser(WeightMatrix.symmetric(q.n) if same else OrderedWeightMatrix.symmetric(q.n))
            return _BetaChooser(BetaRule.uniform_index(K))
        if mode == "beta" or (mode == "lp" and K > 2):
            problem = lp.build_full_beta_lp(drafts, q)
            return _BetaChooser(BetaRule.from_lp(problem, lp._checked(problem), symmetric=same))
        if K != 2:
            raise ValueError(f"weight mode {mode!r} needs exactly two drafts")
        if mode == "lp":
            w = lp.optimal_weights_k2(drafts[0], q) if same else lp.optimal_weights_noniid(drafts[0], drafts[1], q)
        elif mode == "truncated":
            s = min(self.s, q.n)
            w = lp.truncated_weights(drafts[0], q, s) if same else lp.optimal_weights_noniid(drafts[0], drafts[1], q, s)
        else:
            if not same:
                raise ValueError("the fast truncated variant needs identical drafts")
            w = lp.truncated_weights(drafts[0], q, min(self.s, q.n), fast=True)
        return _PairChooser(w)

    def bind(self, drafts, q):
        drafts, q = as_drafts(drafts), as_dist(q)
        return BoundTwoStep(drafts, q, self.chooser(drafts, q), name=self.name)

    def to_dict(self):
        d = {"scheme": "two_step", "weights": self.weights}
        if self.s is not None:
            d["s"] = self.s
        if self.weights == "fixed":
            if isinstance(self.rule, BetaRule):
                d["beta"] = {
                    "K": self.rule.K,
                    "symmetric": self.rule.symmetric,
                    "table": [[list(x), {str(y): v for y, v in row.items()}] for x, row in self.rule.table.items()],
                }
            else:
                d["matrix"] = self.rule.matrix.tolist()
                d["ordered"] = isinstance(self.rule, OrderedWeightMatrix)
        return d


@dataclass(frozen=True)
class SpecInfer(Scheme):
    name = "specinfer"

    def bind(self, drafts, q):
        return BoundSpecInfer(as_drafts(drafts), as_dist(q))

    def to_dict(self):
        return {"scheme": "specinfer"}


@dataclass(frozen=True)
class SpecTr(Scheme):
    name = "spectr"

    def bind(self, drafts, q):
        return BoundSpecTr(as_drafts(drafts), as_dist(q))

    def to_dict(self):
        return {"scheme": "spectr"}


@dataclass(frozen=True)
class TruncatedAlphabet(Scheme):
    """Run ``inner`` against the target restricted to a high-probability set, then correct.

    The set is given explicitly (``support``) or as the top-p / top-k set of
    the target.
    """

    inner: Scheme
    support: tuple[int, ...] | None = None
    top_p: float | None = None
    top_k: int | None = None

    def __post_init__(self):
        if sum(x is not None for x in (self.support, self.top_p, self.top_k)) != 1:
            raise ValueError("give exactly one of support, top_p, top_k")

    @property
    def name(self):
        return f"trunc-alpha({self.inner.name})"

    def omega0(self, q: TokenDist) -> SupportSet:
        if self.support is not None:
            return SupportSet(self.support)
        if self.top_p is not None:
            return top_p_truncate(q, self.top_p)[0]
        return top_k_truncate(q, self.top_k)[0]

    def bind(self, drafts, q):
        q = as_dist(q)
        return BoundTruncatedAlphabet(as_drafts(drafts), q, self.inner, self.omega0(q))

    def to_dict(self):
        d = {"scheme": "truncated_alphabet", "inner": self.inner.to_dict()}
        if self.support is not None:
            d["support"] = list(self.support)
        elif self.top_p is not None:
            d["top_p"] = self.top_p
        else:
            d["top_k"] = self.top_k
        return d


STAGE_MODES = ("lp", "truncated", "symmetric")


@dataclass(frozen=True)
class MultiStagePair(Scheme):
    """Fold K drafts pairwise: each stage selects between the running token and the next draft."""

    stage: str = "lp"
    s: int | None = None

    def __post_init__(self):
        if self.stage not in STAGE_MODES:
            raise ValueError(f"unknown stage mode {self.stage!r}")
        if self.stage == "truncated" and self.s is None:
            raise ValueError("truncated stages need s")

    @property
    def name(self):
        return f"multistage-{self.stage}" + (f"(s={self.s})" if self.s is not None else "")

    def _stage_weights(self, first: TokenDist, second: TokenDist, q: TokenDist, same: bool):
        if self.stage == "symmetric":
            return WeightMatrix.symmetric(q.n) if same else OrderedWeightMatrix.symmetric(q.n)
        s = None if self.stage == "lp" else min(self.s, q.n)
        if same:
            return lp.optimal_weights_k2(first, q) if s is None else lp.truncated_weights(first, q, s)
        return lp.optimal_weights_noniid(first, second, q, s)

    def bind(self, drafts, q):
        drafts, q = as_drafts(drafts), as_dist(q)
        if len(drafts) < 2:
            raise ValueError("multi-stage pairing needs at least two drafts")
        stages = []
        running = drafts[0]
        for k, nxt in enumerate(drafts[1:]):
            same = k == 0 and np.array_equal(running.probs, nxt.probs)
            w = self._stage_weights(running, nxt, q, same)
            stages.append(w)
            running = TokenDist(_pair_dist(running.probs, nxt.probs, w.first_prob()))
        return BoundTwoStep(drafts, q, _StagedChooser(stages), name=self.name)

    def to_dict(self):
        d = {"scheme": "multistage", "stage": self.stage}
        if self.s is not None:
            d["s"] = self.s
        return d


def scheme_from_dict(d: Mapping) -> Scheme:
    tag = d.get("scheme")
    if tag == "single":
        return SingleDraft()
    if tag == "specinfer":
        return SpecInfer()
    if tag == "spectr":
        return SpecTr()
    if tag == "two_step":
        mode = d.get("weights", "lp")
        rule = None
        if mode == "fixed":
            if "beta" in d:
                b = d["beta"]
                table = {tuple(x): {int(y): v for y, v in row.items()} for x, row in b["table"]}
                rule = BetaRule(b["K"], table, symmetric=b.get("symmetric", False))
            else:
                rule = (OrderedWeightMatrix if d.get("ordered") else WeightMatrix)(d["matrix"])
        return TwoStepIS(mode, d.get("s"), rule)
    if tag == "truncated_alphabet":
        support = d.get("support")
        return TruncatedAlphabet(
            scheme_from_dict(d["inner"]),
            support=tuple(support) if support is not None else None,
            top_p=d.get("top_p"),
            top_k=d.get("top_k"),
        )
    if tag == "multistage":
        return MultiStagePair(d.get("stage", "lp"), d.get("s"))
    raise ValueError(f"unknown scheme {tag!r}")


# -- sampling entry points ----------------------------------------------------------


def is_select_k2(x1: int, x2: int, w: WeightMatrix, rng) -> int:
    """Pick from an unordered pair: the smaller id with probability ``w[min, max]``."""
    return w.choose(x1, x2, rng.random())


def selected_dist_k2(p, w: WeightMatrix) -> TokenDist:
    return w.selected_dist(p)


def selected_dist_k2_noniid(p1, p2, w: OrderedWeightMatrix) -> TokenDist:
    return w.selected_dist(p1, p2)


def _rule_chooser(rule) -> _Chooser:
    if rule is None:
        return _FirstToken()
    if isinstance(rule, BetaRule):
        return _BetaChooser(rule)
    return _PairChooser(rule)


def two_step_select(tokens, rule, drafts, q, rng) -> tuple[int, bool]:
    """Select an intermediate token with ``rule`` and verify it by speculative sampling."""
    drafts = as_drafts(drafts, len(tokens))
    sel = BoundTwoStep(drafts, as_dist(q), _rule_chooser(rule)).select(tokens, rng)
    return sel.token, sel.accepted


def specinfer_select(tokens, drafts, q, rng) -> tuple[int, int | None]:
    sel = BoundSpecInfer(as_drafts(drafts, len(tokens)), as_dist(q)).select(tokens, rng)
    return sel.token, sel.index


def spectr_select(tokens, drafts, q, rng) -> tuple[int, int | None]:
    sel = BoundSpecTr(as_drafts(drafts, len(tokens)), as_dist(q)).select(tokens, rng)
    return sel.token, sel.index


def truncated_alphabet_select(tokens, scheme: Scheme, omega0, drafts, q, rng) -> int:
    bound = BoundTruncatedAlphabet(as_drafts(drafts, len(tokens)), as_dist(q), scheme, SupportSet(omega0))
    return bound.select(tokens, rng).token


def multistage_pair_select(tokens, drafts, q, rng, stage: str = "lp", s: int | None = None) -> int:
    return MultiStagePair(stage, s).bind(as_drafts(drafts, len(tokens)), q).select(tokens, rng).token


# -- enumeration oracles ------------------------------------------------------------


def _bound(scheme, drafts, q) -> BoundScheme:
    if isinstance(scheme, BoundScheme):
        return scheme
    return scheme.bind(drafts, q)


def enumerate_laws(scheme, drafts, q) -> tuple[np.ndarray, float, float]:
    """Sum branch laws over every input tuple.

    Returns the output law, the probability of the acceptance event, and
    the probability that the output is one of the input tokens.
    """
    drafts = as_drafts(drafts)
    q = as_dist(q)
    n, K = q.n, len(drafts)
    if n**K > MAX_TUPLES:
        raise lp.GuardExceeded(f"n^K = {n**K} exceeds {MAX_TUPLES}")
    bound = _bound(scheme, drafts, q)
    K_used = bound.K
    J = lp.joint_law(drafts[:K_used])
    out = np.zeros(n)
    acc = hit = 0.0
    for x in itertools.product(range(n), repeat=K_used):
        px = J[x]
        if px <= 0.0:
            continue
        law, a = bound.branch_law(x)
        out += px * law
        acc += px * a
        hit += px * float(law[list(set(x))].sum())
    return out, acc, hit


def exact_output_dist(scheme, drafts, q) -> TokenDist:
    out, _, _ = enumerate_laws(scheme, drafts, q)
    return TokenDist(out)


def exact_accept_prob(scheme, drafts, q) -> float:
    """Probability of the scheme's acceptance event, by enumeration."""
    return enumerate_laws(scheme, drafts, q)[1]


def exact_hit_prob(scheme, drafts, q) -> float:
    """Probability that the output token is one of the inputs, by enumeration."""
    return enumerate_laws(scheme, drafts, q)[2]
