from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmmlda.evaluation import (
    accuracy,
    adjusted_rand_index,
    clustering_report,
    mean_report,
    pairwise_prf,
)

from oracles import pair_table


def ari_oracle(pred, truth):
    a, b, c, d = pair_table(pred, truth)
    den = (a + b) * (b + d) + (a + c) * (c + d)
    if den == 0:
        return 1.0
    return float(Fraction(2 * (a * d - b * c), den))


def prf_oracle(pred, truth):
    a, b, c, _ = pair_table(pred, truth)
    p = Fraction(a, a + b) if a + b else Fraction(0)
    r = Fraction(a, a + c) if a + c else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return float(r), float(p), float(f)


labelings = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 5), min_size=n, max_size=n),
    st.lists(st.sampled_from("abcd"), min_size=n, max_size=n)))


class TestARI:
    def test_identical_any_relabeling(self):
        assert adjusted_rand_index([1, 1, 2, 3], ["x", "x", "y", "z"]) == 1.0

    def test_one_cluster_vs_balanced(self):
        assert adjusted_rand_index([1] * 6, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_small_example(self):
        assert adjusted_rand_index([1, 1, 1, 2], list("aabb")) == ari_oracle([1, 1, 1, 2], list("aabb"))
        # a=1, b=2, c=1, d=2 -> 2(2-2)/(...) = 0
        assert adjusted_rand_index([1, 1, 1, 2], list("aabb")) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([1, 2], [1])

    @settings(max_examples=200, deadline=None)
    @given(labelings)
    def test_matches_oracle(self, pt):
        assert adjusted_rand_index(*pt) == ari_oracle(*pt)

    @settings(max_examples=50, deadline=None)
    @given(labelings, st.permutations(range(6)))
    def test_relabeling_invariant(self, pt, perm):
        pred, truth = pt
        assert adjusted_rand_index([perm[x] for x in pred], truth) == adjusted_rand_index(pred, truth)

    def test_random_permutation_expectation(self):
        rng = np.random.default_rng(0)
        truth = np.repeat(np.arange(4), 25)
        vals = [adjusted_rand_index(rng.permutation(truth), truth) for _ in range(400)]
        assert abs(np.mean(vals)) < 0.01


class TestPRF:
    def test_identical(self):
        assert pairwise_prf([0, 0, 1], [5, 5, 2]) == (1.0, 1.0, 1.0)

    @pytest.mark.parametrize("n", [2, 5, 50])
    def test_one_cluster(self, n):
        r, p, f = pairwise_prf([0] * (2 * n), [0] * n + [1] * n)
        assert r == 1.0
        assert p == float(Fraction(2 * comb(n, 2), comb(2 * n, 2)))

    def test_singletons(self):
        assert pairwise_prf([1, 2, 3, 4], [0, 0, 1, 1]) == (0.0, 0.0, 0.0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            pairwise_prf([1], [1])

    @settings(max_examples=200, deadline=None)
    @given(labelings)
    def test_matches_oracle(self, pt):
        assert tuple(pairwise_prf(*pt)) == prf_oracle(*pt)


class TestAccuracy:
    @pytest.mark.parametrize("pred,truth,expected", [
        ([1, 2, 3], [1, 2, 3], 1.0), ([1, 1], [2, 2], 0.0), ([1, 2, 3, 4], [1, 2, 3, 0], 0.75),
    ])
    def test_values(self, pred, truth, expected):
        assert accuracy(pred, truth) == expected

    def test_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])


def test_reports():
    r1 = clustering_report([0, 0, 1, 1], [0, 0, 1, 1], with_accuracy=True)
    r2 = clustering_report([0, 1, 0, 1], [0, 0, 1, 1])
    assert r1["accuracy"] == 1.0 and "accuracy" not in r2
    m = mean_report([r1, r2])
    assert m["ari"] == pytest.approx((1.0 + r2["ari"]) / 2)
