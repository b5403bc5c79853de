import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmmlda.model import Hyperparameters, canonical_perm, init_state
from gmmlda.permutation import kendall_distance
from gmmlda.sampler import sweep
from gmmlda.supervised import (
    PrecedenceGraph,
    apply_supervision,
    collapse_labels,
    derive_canonical,
    greedy_insert,
    labels_to_u,
    load_split,
    lock_labeled,
    write_split,
)

from conftest import make_corpus


class TestCollapse:
    @pytest.mark.parametrize("z,expected", [
        ((2, 1, 1, 5, 3, 3, 3), (2, 1, 5, 3)),
        ((1, 1, 2, 2), (1, 2)),
        ((1, 2, 1, 1), (2, 1)),
        ((1, 2, 1), (1, 2)),
        ((), ()),
    ])
    def test_examples(self, z, expected):
        assert collapse_labels(z) == expected

    @pytest.mark.parametrize("z,expected", [
        ((2, 1, 1, 5, 3, 3, 3), {1: 2, 2: 1, 3: 3, 5: 1}),
        ((), {}),
        ((4, 4), {4: 2}),
    ])
    def test_labels_to_u(self, z, expected):
        assert labels_to_u(z) == Counter(expected)


class TestDeriveCanonical:
    def test_unanimous(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert derive_canonical([(1, 2, 3)] * 4, 3, rng) == (1, 2, 3)

    def test_majority_example(self):
        assert derive_canonical([(3, 1, 2), (3, 1, 2), (3, 2)], 3, np.random.default_rng(0)) == (3, 1, 2)

    def test_two_cycle_broken_either_way(self):
        seen = {derive_canonical([(1, 2), (2, 1)], 2, np.random.default_rng(s)) for s in range(40)}
        assert seen == {(1, 2), (2, 1)}

    def test_unobserved_labels_appended(self):
        assert derive_canonical([(4, 2)], 5, np.random.default_rng(0)) == (4, 2, 1, 3, 5)
        assert derive_canonical([], 3, np.random.default_rng(0)) == (1, 2, 3)

    def test_graph_edges(self):
        g = PrecedenceGraph.from_orders([(1, 2), (2, 1), (1, 3)], 3)
        assert g.g[0, 1] == 1 and g.g[1, 0] == 1 and np.all(np.diag(g.g) == 0)
        # 2 and 3 never co-occur: 0 >= 0 both ways
        assert g.edges() == {(1, 2), (2, 1), (1, 3), (2, 3), (3, 2)}

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            derive_canonical([(1, 4)], 3, np.random.default_rng(0))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.lists(st.integers(1, 5), max_size=8), max_size=8), st.integers(0, 2**32 - 1))
    def test_always_a_permutation(self, docs, seed):
        pi0 = derive_canonical(docs, 5, np.random.default_rng(seed))
        assert sorted(pi0) == [1, 2, 3, 4, 5]


def exhaustive_insert(pi_prime, pi0):
    current = list(pi_prime)
    for x in pi0:
        if x in current:
            continue
        cands = [current[:p] + [x] + current[p:] for p in range(len(current) + 1)]
        dists = [sum(1 for a, b in itertools.combinations(c, 2)
                     if pi0.index(a) > pi0.index(b)) for c in cands]
        current = cands[int(np.argmin(dists))]
    return tuple(current)


class TestGreedyInsert:
    def test_examples(self):
        assert greedy_insert((2, 1), (1, 2, 3)) == (2, 1, 3)
        assert greedy_insert((), (3, 1, 2)) == (3, 1, 2)
        assert greedy_insert((2, 3, 1), (1, 2, 3)) == (2, 3, 1)

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            greedy_insert((4,), (1, 2, 3))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 6).flatmap(lambda K: st.tuples(
        st.permutations(list(range(1, K + 1))), st.permutations(list(range(1, K + 1))),
        st.integers(0, K))))
    def test_properties(self, args):
        pi0, full, k = args
        pi_prime = tuple(full[:k])
        out = greedy_insert(pi_prime, tuple(pi0))
        assert sorted(out) == sorted(pi0)
        assert tuple(x for x in out if x in pi_prime) == pi_prime
        assert out == exhaustive_insert(pi_prime, list(pi0))


class TestLocking:
    def corpus(self):
        # labels are 0-based ids here
        docs = [[[0, 1], [1, 2], [2, 3]], [[0], [1], [2]], [[3, 3], [0, 1]]]
        labels = [[0, 0, 1], [2, 0, 2], None]
        return make_corpus(docs, V=4, labels=labels, K=3)

    def test_hand_trace(self):
        rng = np.random.default_rng(0)
        state = init_state(self.corpus(), Hyperparameters(K=3, T=2), rng)
        lock_labeled(state, [0, 1])
        a = state.assignments
        sl = state.doc_slice(0)
        assert list(a.u[sl]) == [0, 0, 1] and list(a.z[sl]) == [0, 0, 1]
        assert list(a.pi[0][:2]) == [0, 1]
        assert list(a.fixed) == [True, True, False]
        # non-coherent labels stay as given
        assert list(a.z[state.doc_slice(1)]) == [2, 0, 2]
        state.check_counts()

    def test_sweeps_leave_locked_docs(self):
        rng = np.random.default_rng(1)
        state = init_state(self.corpus(), Hyperparameters(K=3, T=2), rng)
        apply_supervision(state, [0, 1], rng)
        z0 = state.assignments.z.copy()
        for _ in range(25):
            sweep(state, rng)
        for d in (0, 1):
            sl = state.doc_slice(d)
            assert np.array_equal(state.assignments.z[sl], z0[sl])
        state.check_counts()

    def test_relative_inversions(self):
        rng = np.random.default_rng(2)
        state = init_state(self.corpus(), Hyperparameters(K=3, T=2), rng)
        state.pi0 = np.array([2, 0, 1])
        lock_labeled(state, [0])
        a = state.assignments
        for d in range(3):
            assert np.array_equal(canonical_perm(a.upsilon[d], state.pi0), a.pi[d])
        # greedy completion of (1, 2) against pi0 (3, 1, 2) puts 3 first
        assert list(a.pi[0] + 1) == [3, 1, 2]
        assert a.upsilon[0].sum() == 0

    def test_unlabeled_doc_rejected(self):
        state = init_state(self.corpus(), Hyperparameters(K=3, T=2), np.random.default_rng(0))
        with pytest.raises(ValueError):
            lock_labeled(state, [2])

    def test_label_above_k(self):
        corpus = make_corpus([[[0], [1]]], V=2, labels=[[0, 3]], K=4)
        state = init_state(corpus, Hyperparameters(K=4, T=1), np.random.default_rng(0))
        state.hyper.K = 3
        with pytest.raises(ValueError):
            lock_labeled(state, [0])


def test_split_round_trip(tmp_path):
    write_split(["a", "b"], tmp_path / "s.json")
    assert load_split(tmp_path / "s.json") == ["a", "b"]
