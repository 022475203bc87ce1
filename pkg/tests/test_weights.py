import numpy as np
import pytest
from conftest import dists
from hypothesis import given
from hypothesis import strategies as st

from draftsel.weights import OrderedWeightMatrix, WeightMatrix


def test_unordered_complement():
    w = WeightMatrix.from_pairs(3, {(0, 1): 0.25, (2, 1): 0.9})
    assert w[0, 1] == 0.25 and w[1, 0] == 0.75
    assert w[1, 2] == pytest.approx(0.1) and w[2, 1] == pytest.approx(0.9)


def test_rejects_out_of_range():
    with pytest.raises(ValueError):
        WeightMatrix([[1, 1.5], [0, 1]])


def test_selected_dist_examples():
    w = WeightMatrix.from_pairs(2, {(0, 1): 1.0})
    np.testing.assert_allclose(w.selected_dist([0.5, 0.5]).probs, [0.75, 0.25])
    w = WeightMatrix.from_pairs(3, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
    np.testing.assert_allclose(w.selected_dist([1 / 3] * 3).probs, [5 / 9, 3 / 9, 1 / 9])


@given(dists())
def test_symmetric_weights_reproduce_draft(p):
    np.testing.assert_allclose(WeightMatrix.symmetric(p.size).selected_dist(p).probs, p, atol=1e-12)


def test_noniid_examples():
    w = OrderedWeightMatrix.symmetric(2)
    np.testing.assert_allclose(w.selected_dist([1, 0], [0, 1]).probs, [0.5, 0.5])
    w = OrderedWeightMatrix(np.random.default_rng(0).uniform(size=(2, 2)))
    np.testing.assert_allclose(w.selected_dist([1, 0], [1, 0]).probs, [1, 0])


@given(dists(), st.integers(0, 2**32 - 1))
def test_noniid_reduces_to_identical(p, seed):
    n = p.size
    w = WeightMatrix(np.random.default_rng(seed).uniform(size=(n, n)))
    ordered = OrderedWeightMatrix.from_unordered(w)
    np.testing.assert_allclose(ordered.selected_dist(p, p).probs, w.selected_dist(p).probs, atol=1e-12)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_noniid_display_formula(n, seed):
    # expansion over j < i and j > i, with the bar weight for the larger token
    rng = np.random.default_rng(seed)
    p1, p2 = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    W = rng.uniform(size=(n, n))
    got = OrderedWeightMatrix(W).selected_dist(p1, p2).probs
    want = np.zeros(n)
    for i in range(n):
        want[i] = p1[i] * p2[i]
        for j in range(n):
            if j < i:
                want[i] += p1[i] * p2[j] * (1 - W[i, j]) + p1[j] * p2[i] * (1 - W[j, i])
            elif j > i:
                want[i] += p1[i] * p2[j] * W[i, j] + p1[j] * p2[i] * W[j, i]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_choose_semantics():
    w = WeightMatrix.from_pairs(2, {(0, 1): 0.25})
    assert w.choose(1, 1, 0.0) == 1
    assert w.choose(1, 0, 0.2) == 0 and w.choose(0, 1, 0.3) == 1
    ow = OrderedWeightMatrix([[1, 0.2], [0.7, 1]])
    assert ow.choose(0, 1, 0.1) == 0 and ow.choose(0, 1, 0.5) == 1
    assert ow.choose(1, 0, 0.5) == 0 and ow.choose(1, 0, 0.8) == 1
