import numpy as np
import pytest
from conftest import dist_pairs, dists
from hypothesis import given
from hypothesis import strategies as st

from draftsel.prob import (
    DegenerateResidual,
    DimensionMismatch,
    IngestError,
    SupportSet,
    TokenDist,
    effective_alphabet_size,
    overlap,
    parse_records,
    residual_dist,
    sample_index,
    temperature_tilt,
    top_k_truncate,
    top_p_truncate,
    tv_distance,
)


class TestTokenDist:
    def test_renormalizes_within_tolerance(self):
        d = TokenDist([0.5, 0.5 + 5e-10])
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [1.1, -0.1], [], [np.nan, 1.0]])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            TokenDist(bad)

    def test_immutable(self):
        d = TokenDist([0.25, 0.75])
        with pytest.raises(ValueError):
            d.probs[0] = 1.0

    def test_from_logits_is_softmax(self):
        d = TokenDist.from_logits([0.0, np.log(3.0)])
        np.testing.assert_allclose(d.probs, [0.25, 0.75])

    def test_support_set_complement(self):
        s = SupportSet([3, 1])
        assert s.members == (1, 3)
        assert s.complement(5).members == (0, 2, 4)


class TestTv:
    def test_disjoint(self):
        assert tv_distance([1, 0], [0, 1]) == 1.0

    def test_identity(self):
        p = [0.2, 0.3, 0.5]
        assert tv_distance(p, p) == 0.0

    def test_hand_value(self):
        assert tv_distance([0.5, 0.5], [0.8, 0.2]) == pytest.approx(0.3, abs=1e-15)

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            tv_distance([1.0], [0.5, 0.5])

    @given(dist_pairs())
    def test_equals_one_minus_overlap_and_symmetric(self, pq):
        p, q = pq
        assert tv_distance(p, q) == pytest.approx(1.0 - overlap(p, q), abs=1e-12)
        assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)

    @given(dists())
    def test_zero_on_self(self, p):
        assert tv_distance(p, p) <= 1e-15


class TestResidual:
    @pytest.mark.parametrize("p,q", [([0.5, 0.5], [0.8, 0.2]), ([0.2, 0.8], [0.5, 0.5])])
    def test_examples(self, p, q):
        np.testing.assert_allclose(residual_dist(p, q).probs, [1.0, 0.0], atol=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateResidual):
            residual_dist([1 / 3] * 3, [1 / 3] * 3)

    @given(dist_pairs())
    def test_zero_where_target_below_draft(self, pq):
        p, q = pq
        if tv_distance(p, q) < 1e-9:
            return
        r = residual_dist(p, q).probs
        # compare after the same renormalization the residual sees
        a, b = TokenDist(p).probs, TokenDist(q).probs
        assert np.all(r[b <= a] == 0.0)
        # overlap mass plus residual mass rebuilds q
        a = overlap(p, q)
        np.testing.assert_allclose(np.minimum(p, q) + (1 - a) * r, q, atol=1e-12)


class TestTruncation:
    def test_top_p_example(self):
        s, d = top_p_truncate([0.5, 0.3, 0.2], 0.8)
        assert s.members == (0, 1)
        np.testing.assert_allclose(d.probs, [0.625, 0.375, 0.0])

    def test_top_p_full_mass(self):
        s, d = top_p_truncate([0.5, 0.3, 0.2], 1.0)
        assert s.members == (0, 1, 2)
        np.testing.assert_allclose(d.probs, [0.5, 0.3, 0.2])

    def test_top_p_point_mass(self):
        s, d = top_p_truncate([1.0, 0.0], 0.5)
        assert s.members == (0,)
        np.testing.assert_allclose(d.probs, [1.0, 0.0])

    def test_top_k_examples(self):
        s, d = top_k_truncate([0.5, 0.3, 0.2], 2)
        assert s.members == (0, 1)
        np.testing.assert_allclose(d.probs, [0.625, 0.375, 0.0])
        assert top_k_truncate([0.2, 0.5, 0.3], 1)[0].members == (1,)
        np.testing.assert_allclose(top_k_truncate([0.2, 0.5, 0.3], 3)[1].probs, [0.2, 0.5, 0.3])

    def test_ties_by_ascending_id(self):
        assert top_k_truncate([0.25, 0.25, 0.25, 0.25], 2)[0].members == (0, 1)

    @given(dists(), st.floats(0.01, 1.0))
    def test_top_p_mass_and_minimality(self, p, mass):
        s, d = top_p_truncate(p, mass)
        kept = p[list(s)].sum()
        assert kept >= mass - 1e-12
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)
        # dropping the smallest kept token falls short
        if len(s) > 1:
            smallest = min(p[i] for i in s)
            assert kept - smallest < mass + 1e-12

    @given(dists(), st.integers(1, 10))
    def test_top_k_size(self, p, k):
        s, _ = top_k_truncate(p, k)
        assert len(s) == min(k, p.size)


class TestTilt:
    def test_identity(self):
        np.testing.assert_allclose(temperature_tilt([0.8, 0.2], 1.0).probs, [0.8, 0.2])

    def test_uniform_fixed(self):
        np.testing.assert_allclose(temperature_tilt([0.5, 0.5], 0.3).probs, [0.5, 0.5])

    def test_hand_value(self):
        np.testing.assert_allclose(temperature_tilt([0.8, 0.2], 0.5).probs, [0.64 / 0.68, 0.04 / 0.68])

    def test_zeros_stay_zero(self):
        assert temperature_tilt([0.0, 0.3, 0.7], 2.0).probs[0] == 0.0

    @given(dists(), st.floats(0.05, 20.0))
    def test_preserves_argmax(self, p, T):
        assert int(np.argmax(temperature_tilt(p, T).probs)) == int(np.argmax(p))


class TestSampleIndex:
    def test_inverse_cdf(self):
        probs = np.array([0.2, 0.0, 0.8])
        assert sample_index(probs, 0.0) == 0
        assert sample_index(probs, 0.19) == 0
        assert sample_index(probs, 0.2) == 2
        assert sample_index(probs, 1.0 - 1e-17) == 2

    def test_never_picks_zero_mass_tail(self):
        assert sample_index(np.array([0.5, 0.5, 0.0]), 1.0) == 1


class TestIngest:
    def test_both_record_shapes(self):
        recs = parse_records('[{"p": [0.5, 0.5], "q": [1, 0]}, {"p1": [1, 0], "p2": [0, 1], "q": [0.5, 0.5]}]')
        assert set(recs[0]) == {"p", "q"} and set(recs[1]) == {"p1", "p2", "q"}

    def test_empty(self):
        assert parse_records("  \n") == []

    def test_json_error_has_line(self):
        with pytest.raises(IngestError, match=r"f.json:2:"):
            parse_records('[\n{"p": }]', source="f.json")

    def test_schema_error_has_record_index(self):
        with pytest.raises(IngestError, match="record 1"):
            parse_records('[{"p": [1], "q": [1]}, {"p": [0.5, 0.5], "q": [1]}]')

    def test_bad_sum(self):
        with pytest.raises(IngestError, match="record 0"):
            parse_records('[{"p": [0.5, 0.6], "q": [0.5, 0.5]}]')

    def test_effective_size(self):
        assert effective_alphabet_size([1, 0, 0], 0.95) == 1
        assert effective_alphabet_size([0.5, 0.3, 0.2], 0.95) == 3
