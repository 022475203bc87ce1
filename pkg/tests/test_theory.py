import itertools

import numpy as np
import pytest
from conftest import dist_pairs
from hypothesis import given, settings
from hypothesis import strategies as st

from draftsel import lp, theory
from draftsel.lp import GuardExceeded
from draftsel.prob import overlap
from draftsel.sim import instance_pair


def brute_condition(p, q, K=2):
    # independent oracle: explicit loop over every proper subset
    n = len(p)
    for r in range(1, n):
        for S in itertools.combinations(range(n), r):
            if sum(q[i] for i in S) < sum(p[i] for i in S) ** K - 1e-12:
                return False
    return True


def brute_thm3(p, q):
    n = len(p)
    best = np.inf
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            Sc = [i for i in range(n) if i not in S]
            qs, ps, pc = sum(q[i] for i in S), sum(p[i] for i in S), sum(p[i] for i in Sc)
            best = min(best, qs + pc**2 + 2 * ps * pc)
    return min(1.0, best)


class TestThm2:
    @pytest.mark.parametrize("q1", np.linspace(0, 1, 41))
    def test_example_interval(self, q1):
        holds, _ = theory.thm2_condition([0.5, 0.5], [q1, 1 - q1])
        assert holds == (0.25 <= q1 <= 0.75)

    def test_equal_distributions(self):
        assert theory.thm2_condition([0.1, 0.2, 0.7], [0.1, 0.2, 0.7]) == (True, None)

    @pytest.mark.parametrize("q2", np.linspace(0, 2 / 3, 61))
    def test_left_family_interval(self, q2):
        holds, _ = theory.thm2_condition([1 / 3] * 3, [1 / 3, q2, 2 / 3 - q2])
        assert holds == (1 / 9 - 1e-12 <= q2 <= 5 / 9 + 1e-12)

    def test_certificate_is_violating(self):
        holds, cert = theory.thm2_condition([0.5, 0.5], [0.9, 0.1])
        assert not holds
        assert cert.subset.members == (1,)
        assert cert.value == pytest.approx(0.1 - 0.25)

    @given(dist_pairs(), st.randoms())
    def test_relabel_invariant(self, pq, rnd):
        p, q = pq
        perm = list(range(p.size))
        rnd.shuffle(perm)
        assert theory.thm2_condition(p, q)[0] == theory.thm2_condition(p[perm], q[perm])[0]

    @given(dist_pairs())
    def test_matches_brute_force(self, pq):
        p, q = pq
        assert theory.thm2_condition(p, q)[0] == brute_condition(p, q)

    def test_guard(self):
        with pytest.raises(GuardExceeded):
            theory.thm2_condition(np.full(25, 1 / 25), np.full(25, 1 / 25))


class TestThm3:
    def test_examples(self):
        assert theory.thm3_accept_prob([0.3, 0.7], [0.3, 0.7])[0] == pytest.approx(1.0)
        v, cert = theory.thm3_accept_prob([0.5, 0.5], [0.8, 0.2])
        assert v == pytest.approx(0.95) and cert.subset.members == (1,)
        assert theory.thm3_accept_prob([0.5, 0.5], [0.7, 0.3])[0] == pytest.approx(1.0)

    @given(dist_pairs())
    def test_between_single_draft_and_one(self, pq):
        p, q = pq
        v, _ = theory.thm3_accept_prob(p, q)
        assert overlap(p, q) - 1e-12 <= v <= 1.0

    @given(dist_pairs())
    def test_matches_brute_force(self, pq):
        p, q = pq
        assert theory.thm3_accept_prob(p, q)[0] == pytest.approx(brute_thm3(p, q), abs=1e-12)

    @given(dist_pairs())
    def test_one_iff_condition(self, pq):
        p, q = pq
        v, _ = theory.thm3_accept_prob(p, q)
        assert (v >= 1.0 - 1e-12) == theory.thm2_condition(p, q)[0]

    @settings(max_examples=60)
    @given(dist_pairs(max_n=10))
    def test_matches_lp(self, pq):
        p, q = pq
        assert theory.thm3_accept_prob(p, q)[0] == pytest.approx(lp.optimal_accept_prob(p, q, 2), abs=1e-9)


class TestConjecture:
    def test_k2_is_thm3(self):
        p, q = [0.2, 0.5, 0.3], [0.6, 0.1, 0.3]
        assert theory.conjecture_accept_prob(p, q, 2) == pytest.approx(theory.thm3_accept_prob(p, q)[0])
        assert theory.conjecture_condition_k(p, q, 2) == theory.thm2_condition(p, q)[0]

    @given(dist_pairs())
    def test_k1_is_overlap(self, pq):
        p, q = pq
        assert theory.conjecture_accept_prob(p, q, 1) == pytest.approx(overlap(p, q), abs=1e-12)

    def test_examples(self):
        assert theory.conjecture_accept_prob([0.5, 0.5], [0.5, 0.5], 3) == pytest.approx(1.0)
        assert lp.optimal_accept_prob([0.5, 0.5], [0.5, 0.5], 3) == pytest.approx(1.0)
        assert theory.conjecture_condition_k([0.5, 0.5], [0.5, 0.5], 3)
        assert not theory.conjecture_condition_k([0.5, 0.5], [0.9, 0.1], 3)

    @given(dist_pairs())
    def test_non_decreasing_in_k(self, pq):
        p, q = pq
        vals = [theory.conjecture_accept_prob(p, q, K) for K in range(1, 6)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestPenalty:
    def test_examples(self):
        assert theory.truncation_penalty([0.5, 0.5], [0.8, 0.2], []) == 0.0
        assert theory.truncation_penalty([0.5, 0.5], [0.8, 0.2], [1]) == 0.0
        assert theory.truncation_penalty([0.5, 0.5], [0.8, 0.2], [0]) == pytest.approx(0.55)


class TestHarness:
    def test_empty(self):
        rep = theory.verify_conjecture_harness(instance_pair(), [3], [2, 3], 0)
        assert rep.rows == [] and rep.max_deviation == 0.0
        assert rep.to_csv().splitlines() == ["instance,n,K,lp_value,formula_value,delta,condition_agrees,boundary"]

    def test_k2_matches_lp_within_tolerance(self):
        rep = theory.verify_conjecture_harness(instance_pair("temperature"), [2], range(2, 7), 60, seed=3)
        assert rep.max_deviation <= 1e-9 and rep.disagreements == 0

    def test_k3_report_is_deterministic(self):
        a = theory.verify_conjecture_harness(instance_pair(), [3], [2, 3, 4], 40, seed=5)
        b = theory.verify_conjecture_harness(instance_pair(), [3], [2, 3, 4], 40, seed=5)
        assert a.to_csv() == b.to_csv()
        assert len(a.rows) == 40 and {r.n for r in a.rows} == {2, 3, 4}
