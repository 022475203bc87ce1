"""Linear programs for optimal and truncated token selection.

Everything is solved by a small dense two-phase simplex with Bland's rule;
the problems are guarded to desk scale so no external solver is needed.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .prob import DimensionMismatch, TokenDist, as_dist
from .weights import OrderedWeightMatrix, WeightMatrix

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_PIVOTS = 10**6
MAX_TUPLES = 10**6
ONE_TOL = 1e-9


class GuardExceeded(RuntimeError):
    pass


@dataclass
class LpProblem:
    """``maximize c @ x + constant`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lb <= x <= ub``."""

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list[str]
    constant: float = 0.0
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def num_vars(self) -> int:
        return self.c.size

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_text(self) -> str:
        """One constraint per line, for cross-checking against other solvers."""

        def expr(row):
            terms = [f"{v:+.17g} {self.names[j]}" for j, v in enumerate(row) if v != 0.0]
            return " ".join(terms) if terms else "0"

        lines = [f"maximize {expr(self.c)} {self.constant:+.17g}"]
        for row, b in zip(self.A_ub, self.b_ub):
            lines.append(f"ub: {expr(row)} <= {b:.17g}")
        for row, b in zip(self.A_eq, self.b_eq):
            lines.append(f"eq: {expr(row)} = {b:.17g}")
        for name, lo, hi in zip(self.names, self.lb, self.ub):
            lines.append(f"bound: {lo:.17g} <= {name} <= {hi:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | guard-exceeded
    objective: float
    x: np.ndarray
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def max_violation(self, problem: LpProblem) -> float:
        x = self.x
        v = [0.0]
        if problem.A_ub.size:
            v.append(float(np.max(problem.A_ub @ x - problem.b_ub)))
        if problem.A_eq.size:
            v.append(float(np.max(np.abs(problem.A_eq @ x - problem.b_eq))))
        v.append(float(np.max(problem.lb - x, initial=0.0)))
        v.append(float(np.max(x - problem.ub, initial=0.0)))
        return max(v)


class _Builder:
    def __init__(self):
        self.names: list[str] = []
        self.c: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.ub_rows: list[tuple[dict[int, float], float]] = []
        self.eq_rows: list[tuple[dict[int, float], float]] = []

    def var(self, name: str, lb: float = 0.0, ub: float = np.inf, obj: float = 0.0) -> int:
        self.names.append(name)
        self.c.append(obj)
        self.lb.append(lb)
        self.ub.append(ub)
        return len(self.names) - 1

    def le(self, coeffs: dict[int, float], rhs: float) -> None:
        self.ub_rows.append((coeffs, rhs))

    def eq(self, coeffs: dict[int, float], rhs: float) -> None:
        self.eq_rows.append((coeffs, rhs))

    def build(self, constant: float = 0.0, **meta) -> LpProblem:
        N = len(self.names)

        def dense(rows):
            A = np.zeros((len(rows), N))
            b = np.zeros(len(rows))
            for r, (coeffs, rhs) in enumerate(rows):
                for j, v in coeffs.items():
                    A[r, j] += v
                b[r] = rhs
            return A, b

        A_ub, b_ub = dense(self.ub_rows)
        A_eq, b_eq = dense(self.eq_rows)
        return LpProblem(
            c=np.array(self.c, dtype=float),
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            names=list(self.names),
            constant=constant,
            meta=meta,
        )


# -- simplex ---------------------------------------------------------------


def _pivot(T: np.ndarray, basis: list[int], r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = j


def _iterate(T, basis, allowed: int, tol: float, budget: list[int]) -> str:
    """Bland's-rule pivoting on a tableau whose last row is the objective.

    Columns ``>= allowed`` (artificials in phase two) never enter.
    """
    m = T.shape[0] - 1
    while True:
        obj = T[-1, :allowed]
        cand = np.flatnonzero(obj < -tol)
        if cand.size == 0:
            return "optimal"
        j = int(cand[0])
        colj = T[:m, j]
        rows = np.flatnonzero(colj > tol)
        if rows.size == 0:
            return "unbounded"
        ratios = T[rows, -1] / colj[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        if budget[0] >= MAX_PIVOTS:
            return "guard-exceeded"
        budget[0] += 1
        _pivot(T, basis, r, j)


def solve_lp(problem: LpProblem, tol: float = PIVOT_TOL) -> LpSolution:
    """Solve ``problem`` with a dense two-phase simplex using Bland's anti-cycling rule."""
    c = np.asarray(problem.c, dtype=float)
    N = c.size
    A_ub = np.asarray(problem.A_ub, dtype=float).reshape(-1, N) if problem.A_ub.size else np.zeros((0, N))
    A_eq = np.asarray(problem.A_eq, dtype=float).reshape(-1, N) if problem.A_eq.size else np.zeros((0, N))
    b_ub = np.asarray(problem.b_ub, dtype=float).ravel()
    b_eq = np.asarray(problem.b_eq, dtype=float).ravel()
    lb = np.asarray(problem.lb, dtype=float).ravel()
    ub = np.asarray(problem.ub, dtype=float).ravel()
    if (
        A_ub.shape != (b_ub.size, N)
        or A_eq.shape != (b_eq.size, N)
        or lb.size != N
        or ub.size != N
        or len(problem.names) != N
    ):
        raise DimensionMismatch("inconsistent LP dimensions")
    if not np.all(np.isfinite(lb)):
        raise ValueError("lower bounds must be finite")
    if np.any(ub < lb - FEAS_TOL):
        return LpSolution("infeasible", np.nan, np.full(N, np.nan))

    # shift x = lb + y, y >= 0; finite upper bounds become rows
    fin = np.flatnonzero(np.isfinite(ub))
    U = np.zeros((fin.size, N))
    U[np.arange(fin.size), fin] = 1.0
    A_le = np.vstack([A_ub, U])
    b_le = np.concatenate([b_ub - A_ub @ lb, ub[fin] - lb[fin]])
    b_e = b_eq - A_eq @ lb
    m_le, m_eq = A_le.shape[0], A_eq.shape[0]
    m = m_le + m_eq

    need_art = [i for i in range(m_le) if b_le[i] < 0] + [m_le + i for i in range(m_eq)]
    n_art = len(need_art)
    ncols = N + m_le + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m_le, :N] = A_le
    T[:m_le, N : N + m_le] = np.eye(m_le)
    T[:m_le, -1] = b_le
    T[m_le:m, :N] = A_eq
    T[m_le:m, -1] = b_e
    basis = [N + i for i in range(m_le)] + [-1] * m_eq
    for k, i in enumerate(need_art):
        if T[i, -1] < 0:
            T[i, :-1] *= -1.0
            T[i, -1] *= -1.0
        T[i, N + m_le + k] = 1.0
        basis[i] = N + m_le + k

    budget = [0]
    art0 = N + m_le
    if n_art:
        T[-1, art0:ncols] = 1.0
        for i in need_art:
            T[-1] -= T[i]
        status = _iterate(T, basis, ncols, tol, budget)
        if status == "guard-exceeded":
            return LpSolution(status, np.nan, np.full(N, np.nan), budget[0])
        if T[-1, -1] < -FEAS_TOL:
            return LpSolution("infeasible", np.nan, np.full(N, np.nan), budget[0])
        # drive remaining zero-level artificials out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= art0:
                row = T[r, :art0]
                nz = np.flatnonzero(np.abs(row) > tol)
                if nz.size:
                    _pivot(T, basis, r, int(nz[0]))
                else:
                    keep[r] = False
        T = np.delete(T[keep], np.s_[art0:ncols], axis=1)
        basis = [b for b, k in zip(basis, keep[:m]) if k]
        m = len(basis)
    # phase two objective row: z - c.y = c.lb
    T[-1] = 0.0
    T[-1, :N] = -c
    for r, bj in enumerate(basis):
        if T[-1, bj] != 0.0:
            T[-1] -= T[-1, bj] * T[r]
    status = _iterate(T, basis, art0, tol, budget)
    if status != "optimal":
        return LpSolution(status, np.nan, np.full(N, np.nan), budget[0])
    y = np.zeros(T.shape[1] - 1)
    for r, bj in enumerate(basis):
        y[bj] = T[r, -1]
    x = lb + y[:N]
    return LpSolution("optimal", float(c @ x + problem.constant), x, budget[0])


# -- draft laws --------------------------------------------------------------


def joint_law(draft, K: int | None = None) -> np.ndarray:
    """Joint law of the K input tokens as an ``(n,)*K`` array.

    ``draft`` is one distribution (with ``K``) for identical independent
    drafts, a sequence of distributions for independent drafts, or an
    explicit joint array.
    """
    if isinstance(draft, np.ndarray) and draft.ndim >= 2:
        J = np.asarray(draft, dtype=float)
        if len(set(J.shape)) != 1 or abs(J.sum() - 1.0) > 1e-9 or np.any(J < -1e-12):
            raise ValueError("joint law must be a square probability array")
        if K is not None and J.ndim != K:
            raise DimensionMismatch("joint law rank differs from K")
        return np.clip(J, 0.0, None) / J.sum()
    if isinstance(draft, (TokenDist, np.ndarray)) or (
        isinstance(draft, Sequence) and draft and np.isscalar(draft[0])
    ):
        if K is None:
            raise ValueError("K is required for a single draft distribution")
        drafts = [as_dist(draft)] * K
    else:
        drafts = [as_dist(d) for d in draft]
        if K is not None and len(drafts) != K:
            raise DimensionMismatch(f"expected {K} drafts, got {len(drafts)}")
    n = drafts[0].n
    if any(d.n != n for d in drafts):
        raise DimensionMismatch("drafts differ in vocabulary size")
    if n ** len(drafts) > MAX_TUPLES:
        raise GuardExceeded(f"n^K = {n ** len(drafts)} exceeds {MAX_TUPLES}")
    J = drafts[0].probs
    for d in drafts[1:]:
        J = np.multiply.outer(J, d.probs)
    return J


def build_full_beta_lp(draft, q, K: int | None = None) -> LpProblem:
    """LP over all selection probabilities ``beta_y(x_1..x_K)``.

    Tuples with zero probability are dropped and single-token tuples are
    folded into constants; ``beta`` is only defined for tokens present in
    the tuple.
    """
    q = as_dist(q).probs
    J = joint_law(draft, K)
    n = J.shape[0]
    if n != q.size:
        raise DimensionMismatch("draft and target differ in vocabulary size")
    if J.size > MAX_TUPLES:
        raise GuardExceeded(f"{J.size} input tuples exceed {MAX_TUPLES}")
    b = _Builder()
    t = [b.var(f"t[{y}]", 0.0, float(q[y]), 1.0) for y in range(n)]
    fixed_mass = np.zeros(n)
    links: list[dict[int, float]] = [{t[y]: 1.0} for y in range(n)]
    tuples = []
    for x in itertools.product(range(n), repeat=J.ndim):
        px = J[x]
        if px <= 0.0:
            continue
        members = sorted(set(x))
        if len(members) == 1:
            fixed_mass[members[0]] += px
            continue
        idx = {}
        for y in members:
            j = b.var(f"beta[{y}|{','.join(map(str, x))}]")
            idx[y] = j
            links[y][j] = -px
        b.eq({j: 1.0 for j in idx.values()}, 1.0)
        tuples.append((x, idx))
    for y in range(n):
        b.le(links[y], float(fixed_mass[y]))
    return b.build(kind="beta", n=n, K=J.ndim, tuples=tuples, fixed_mass=fixed_mass)


def _pair_lp(p, q, free, fixed, objective_tokens, kind: str) -> LpProblem:
    """Shared builder for the identical-draft pair-weight programs.

    ``free`` lists pairs ``(i, j)``, ``i < j``, whose weight is a variable;
    ``fixed`` maps the remaining pairs to constants.  Only tokens in
    ``objective_tokens`` carry an auxiliary ``t`` in the objective.
    """
    p, q = as_dist(p).probs, as_dist(q).probs
    if p.size != q.size:
        raise DimensionMismatch("draft and target differ in vocabulary size")
    n = p.size
    b = _Builder()
    wvar = {pair: b.var(f"w[{pair[0]},{pair[1]}]", 0.0, 1.0) for pair in free}
    const = p * p
    for (i, j), w in fixed.items():
        m = 2.0 * p[i] * p[j]
        const[i] += m * w
        const[j] += m * (1.0 - w)
    for k in objective_tokens:
        tk = b.var(f"t[{k}]", 0.0, float(q[k]), 1.0)
        row = {tk: 1.0}
        rhs = const[k]
        for (i, j), v in wvar.items():
            m = 2.0 * p[i] * p[j]
            if k == i:
                row[v] = row.get(v, 0.0) - m
            elif k == j:
                # contributes m * (1 - w)
                row[v] = row.get(v, 0.0) + m
                rhs += m
        b.le(row, float(rhs))
    return b.build(kind=kind, n=n, pairs=list(free), fixed=dict(fixed), objective_tokens=list(objective_tokens))


def build_w_lp_k2(p, q) -> LpProblem:
    """Pair-weight LP for two identical drafts over all ``n(n-1)/2`` weights."""
    n = as_dist(p).n
    free = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return _pair_lp(p, q, free, {}, range(n), kind="w")


def truncation_order(p, q) -> np.ndarray:
    """Tokens by descending ``q_i - p_i^2``, ties by ascending id."""
    p, q = as_dist(p).probs, as_dist(q).probs
    gap = q - p * p
    return np.lexsort((np.arange(p.size), -gap))


def _preferred_pairs(tokens_in_order, omega1: set[int], inside: str) -> dict[tuple[int, int], float]:
    fixed = {}
    rank = {t: r for r, t in enumerate(tokens_in_order)}
    for a, c in itertools.combinations(tokens_in_order, 2):
        if a in omega1 and c in omega1:
            continue
        i, j = min(a, c), max(a, c)
        if (a in omega1) != (c in omega1):
            keep = a if a in omega1 else c
            fixed[(i, j)] = 1.0 if keep == i else 0.0
        elif inside == "half":
            fixed[(i, j)] = 0.5
        else:
            keep = a if rank[a] < rank[c] else c
            fixed[(i, j)] = 1.0 if keep == i else 0.0
    return fixed


def build_truncated_w_lp(p, q, s: int) -> tuple[LpProblem, dict[tuple[int, int], float]]:
    """Truncated LP: free weights only among the ``s`` tokens with largest ``q - p^2``.

    All other pairs prefer the token ranked earlier (Omega_1 over Omega_2,
    and within Omega_2 the earlier one).  Returns the LP and the fixed weights
    keyed by ``(i, j)`` with ``i < j`` in original token ids.
    """
    n = as_dist(p).n
    if not 1 <= s <= n:
        raise ValueError("s must lie in 1..n")
    order = truncation_order(p, q)
    omega1 = sorted(int(t) for t in order[:s])
    fixed = _preferred_pairs([int(t) for t in order], set(omega1), inside="ordered")
    free = [(i, j) for i, j in itertools.combinations(omega1, 2)]
    lp = _pair_lp(p, q, free, fixed, omega1, kind="truncated")
    lp.meta["omega1"] = omega1
    return lp, fixed


def top_s_by_gap(gap: np.ndarray, s: int) -> list[int]:
    """The ``s`` largest entries of ``gap`` (ties by ascending id) without a full sort."""
    return sorted(heapq.nlargest(s, range(gap.size), key=lambda i: (gap[i], -i)))


def build_fast_truncated_variant(p, q, s: int) -> tuple[LpProblem, dict[tuple[int, int], float]]:
    """Truncated LP with weight one half between any two tokens outside the top ``s``."""
    pp, qq = as_dist(p).probs, as_dist(q).probs
    n = pp.size
    if not 1 <= s <= n:
        raise ValueError("s must lie in 1..n")
    omega1 = top_s_by_gap(qq - pp * pp, s)
    rest = [i for i in range(n) if i not in set(omega1)]
    fixed = _preferred_pairs(omega1 + rest, set(omega1), inside="half")
    free = [(i, j) for i, j in itertools.combinations(omega1, 2)]
    lp = _pair_lp(p, q, free, fixed, omega1, kind="fast")
    lp.meta["omega1"] = omega1
    return lp, fixed


def build_noniid_w_lp_k2(p1, p2, q, s: int | None = None) -> LpProblem:
    """Ordered-weight LP for two drafts with different distributions.

    Variable ``w[a,b]`` is the probability of keeping the smaller token id
    given first input ``a`` and second input ``b``.  With ``s`` set, only
    pairs inside the top ``s`` tokens by ``q - p1*p2`` stay free; other
    pairs keep the earlier-ranked token.
    """
    p1, p2, q = as_dist(p1).probs, as_dist(p2).probs, as_dist(q).probs
    if not p1.size == p2.size == q.size:
        raise DimensionMismatch("drafts and target differ in vocabulary size")
    n = q.size
    if s is None:
        s = n
    if not 1 <= s <= n:
        raise ValueError("s must lie in 1..n")
    gap = q - p1 * p2
    order = [int(t) for t in np.lexsort((np.arange(n), -gap))]
    omega1 = set(order[:s])
    rank = {t: r for r, t in enumerate(order)}
    P = np.outer(p1, p2)
    const = np.diag(P).copy()
    b = _Builder()
    wvar = {}
    fixed = {}
    for a, c in itertools.permutations(range(n), 2):
        lo = min(a, c)
        if a in omega1 and c in omega1:
            wvar[(a, c)] = b.var(f"w[{a},{c}]", 0.0, 1.0)
            continue
        if (a in omega1) != (c in omega1):
            keep = a if a in omega1 else c
        else:
            keep = a if rank[a] < rank[c] else c
        w = 1.0 if keep == lo else 0.0
        fixed[(a, c)] = w
        const[lo] += P[a, c] * w
        const[max(a, c)] += P[a, c] * (1.0 - w)
    objective_tokens = sorted(omega1)
    for k in objective_tokens:
        tk = b.var(f"t[{k}]", 0.0, float(q[k]), 1.0)
        row = {tk: 1.0}
        rhs = const[k]
        for (a, c), v in wvar.items():
            if k == min(a, c):
                row[v] = row.get(v, 0.0) - P[a, c]
            elif k == max(a, c):
                row[v] = row.get(v, 0.0) + P[a, c]
                rhs += P[a, c]
        b.le(row, float(rhs))
    return b.build(
        kind="noniid", n=n, pairs=list(wvar), fixed=fixed, objective_tokens=objective_tokens, omega1=sorted(omega1)
    )


# -- extracting rules from solutions ----------------------------------------


def _checked(problem: LpProblem) -> LpSolution:
    sol = solve_lp(problem)
    if not sol.ok:
        raise RuntimeError(f"LP solve failed: {sol.status}")
    return sol


def weights_from_solution(problem: LpProblem, sol: LpSolution):
    """Weight matrix (ordered for the non-identical LP) encoded by a solved pair LP."""
    n = problem.meta["n"]
    pairs = problem.meta["pairs"]
    fixed = problem.meta["fixed"]
    values = {pair: float(np.clip(sol.x[k], 0.0, 1.0)) for k, pair in enumerate(pairs)}
    if problem.meta["kind"] == "noniid":
        W = np.full((n, n), 0.5)
        for (a, c), w in itertools.chain(fixed.items(), values.items()):
            W[a, c] = w
        return OrderedWeightMatrix(W)
    return WeightMatrix.from_pairs(n, {**fixed, **values})


def beta_from_solution(problem: LpProblem, sol: LpSolution) -> dict[tuple[int, ...], dict[int, float]]:
    """Selection probabilities per ordered input tuple from a solved beta LP."""
    rule = {}
    for x, idx in problem.meta["tuples"]:
        vals = {y: max(0.0, float(sol.x[j])) for y, j in idx.items()}
        total = sum(vals.values())
        rule[x] = {y: v / total for y, v in vals.items()} if total > 0 else {y: 1.0 / len(vals) for y in vals}
    return rule


def optimal_weights_k2(p, q) -> WeightMatrix:
    lp = build_w_lp_k2(p, q)
    return weights_from_solution(lp, _checked(lp))


def truncated_weights(p, q, s: int, fast: bool = False) -> WeightMatrix:
    lp, _ = (build_fast_truncated_variant if fast else build_truncated_w_lp)(p, q, s)
    return weights_from_solution(lp, _checked(lp))


def optimal_weights_noniid(p1, p2, q, s: int | None = None) -> OrderedWeightMatrix:
    lp = build_noniid_w_lp_k2(p1, p2, q, s)
    return weights_from_solution(lp, _checked(lp))


def _identical(drafts) -> bool:
    return all(np.array_equal(drafts[0].probs, d.probs) for d in drafts[1:])


def optimal_accept_prob(draft, q, K: int | None = None, method: str = "auto") -> float:
    """Optimal acceptance probability by building and solving the matching LP.

    ``method="auto"`` uses the pair-weight LP for two drafts and the full
    beta LP otherwise; ``method="beta"`` always uses the full LP.
    """
    if isinstance(draft, np.ndarray) and draft.ndim >= 2:
        return _checked(build_full_beta_lp(draft, q, K)).objective
    if isinstance(draft, TokenDist) or np.ndim(draft) == 1 and np.isscalar(draft[0]):
        if K is None:
            raise ValueError("K is required for a single draft distribution")
        drafts = [as_dist(draft)] * K
    else:
        drafts = [as_dist(d) for d in draft]
    if method == "auto" and len(drafts) == 2:
        if _identical(drafts):
            lp = build_w_lp_k2(drafts[0], q)
        else:
            lp = build_noniid_w_lp_k2(drafts[0], drafts[1], q)
        return _checked(lp).objective
    return _checked(build_full_beta_lp(drafts, q)).objective


def feasibility_accepts_one(draft, q, K: int | None = None) -> bool:
    """Whether acceptance one is attainable, decided by the LP optimum."""
    return abs(1.0 - optimal_accept_prob(draft, q, K)) <= ONE_TOL
