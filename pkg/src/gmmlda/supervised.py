"""Supervision from sentence intent labels.

Labeled documents get a fixed bag, ordering and intent sequence.  The
canonical ordering is estimated from the labeled documents by a majority
precedence graph, and each labeled document's partial ordering is completed
by greedy insertion of its missing intents.

The public functions here use 1-based intent ids.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import ModelState, canonical_perm, order_bag, rebuild_counts, relative_inversion
from .permutation import kendall_distance


def collapse_labels(z_d: Sequence[int]) -> tuple[int, ...]:
    """Distinct labels ordered by where each one appears most consecutively.

    A label split over several runs is placed at the start of its longest
    run; the first of equally long runs wins.
    """
    best: dict[int, tuple[int, int]] = {}  # label -> (run length, start)
    pos = 0
    for label, run in groupby(z_d):
        n = len(list(run))
        if label not in best or n > best[label][0]:
            best[label] = (n, pos)
        pos += n
    return tuple(sorted(best, key=lambda lab: best[lab][1]))


def labels_to_u(z_d: Sequence[int]) -> Counter:
    return Counter(z_d)


@dataclass
class PrecedenceGraph:
    g: np.ndarray       # g[i, j]: how often i precedes j (0-based indices)
    nodes: tuple        # observed labels, 1-based

    @classmethod
    def from_orders(cls, orders: Iterable[Sequence[int]], K: int) -> "PrecedenceGraph":
        g = np.zeros((K, K), dtype=np.int64)
        seen = set()
        for order in orders:
            seen.update(order)
            for i, a in enumerate(order):
                for b in order[i + 1:]:
                    g[a - 1, b - 1] += 1
        return cls(g, tuple(sorted(seen)))

    def edges(self) -> set:
        out = set()
        for i in self.nodes:
            for j in self.nodes:
                if i != j and self.g[i - 1, j - 1] >= self.g[j - 1, i - 1]:
                    out.add((i, j))
        return out


def _find_cycle(nodes, edges) -> Optional[list]:
    adj = {n: sorted(j for i, j in edges if i == n) for n in nodes}
    color = dict.fromkeys(nodes, 0)
    stack_path: list = []

    def visit(n):
        color[n] = 1
        stack_path.append(n)
        for m in adj[n]:
            if color[m] == 1:
                return stack_path[stack_path.index(m):] + [m]
            if color[m] == 0:
                found = visit(m)
                if found:
                    return found
        stack_path.pop()
        color[n] = 2
        return None

    for n in nodes:
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return None


def derive_canonical(labeled_docs: Iterable[Sequence[int]], K: int,
                     rng: np.random.Generator) -> tuple[int, ...]:
    """Estimate the canonical intent ordering from labeled intent sequences."""
    if K < 1:
        raise ValueError("K must be >= 1")
    orders = [collapse_labels(z) for z in labeled_docs if len(z)]
    for order in orders:
        if any(not 1 <= x <= K for x in order):
            raise ValueError(f"label outside [1, {K}] in {order}")
    graph = PrecedenceGraph.from_orders(orders, K)
    nodes, edges = list(graph.nodes), graph.edges()

    while True:
        cycle = _find_cycle(nodes, edges)
        if cycle is None:
            break
        cycle_edges = list(zip(cycle[:-1], cycle[1:]))
        edges.discard(cycle_edges[rng.integers(len(cycle_edges))])

    indeg = {n: 0 for n in nodes}
    for _, j in edges:
        indeg[j] += 1
    ready = sorted(n for n in nodes if indeg[n] == 0)
    out = []
    while ready:
        n = ready.pop(int(rng.integers(len(ready))))
        out.append(n)
        for i, j in sorted(edges):
            if i == n:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
        ready.sort()
    out.extend(x for x in range(1, K + 1) if x not in graph.nodes)
    return tuple(out)


def greedy_insert(pi_prime: Sequence[int], pi0: Sequence[int]) -> tuple[int, ...]:
    """Complete ``pi_prime`` to a full ordering close to ``pi0``.

    Missing intents are inserted in ``pi0`` order, each at the position
    minimizing the Kendall distance to ``pi0`` restricted to the intents
    placed so far (earliest position on ties).
    """
    if not set(pi_prime) <= set(pi0):
        raise ValueError("pi_prime contains intents missing from pi0")
    current = list(pi_prime)
    for x in pi0:
        if x in current:
            continue
        best_pos, best_dist = 0, None
        for p in range(len(current) + 1):
            cand = current[:p] + [x] + current[p:]
            ref = [y for y in pi0 if y in cand]
            dist = kendall_distance(cand, ref)
            if best_dist is None or dist < best_dist:
                best_pos, best_dist = p, dist
        current.insert(best_pos, x)
    return tuple(current)


def lock_labeled(state: ModelState, labeled: Iterable[int]) -> ModelState:
    """Fix ``u``, ``pi`` and ``z`` of the given documents to their labels.

    Uses ``state.pi0`` as the canonical ordering.  Inversion vectors of all
    documents are kept relative to ``pi0``, so unlocked orderings are
    re-derived here as well.
    """
    corpus, a = state.corpus, state.assignments
    K, pi0 = state.K, state.pi0
    pi0_1 = tuple(int(x) + 1 for x in pi0)
    arr = corpus.arrays
    for d in labeled:
        labels = corpus.documents[d].labels
        if labels is None:
            raise ValueError(f"document {corpus.documents[d].doc_id!r} has no labels")
        if any(not 0 <= lab < K for lab in labels):
            raise ValueError(f"label id outside [1, {K}] in document {corpus.documents[d].doc_id!r}")
        z1 = [lab + 1 for lab in labels]
        pi_d = np.array(greedy_insert(collapse_labels(z1), pi0_1), dtype=np.int64) - 1
        sl = slice(arr.doc_ptr[d], arr.doc_ptr[d + 1])
        a.u[sl] = np.asarray(labels, dtype=np.int64)
        a.z[sl] = np.asarray(labels, dtype=np.int64)
        a.pi[d] = pi_d
        a.upsilon[d] = relative_inversion(pi_d, pi0)
        a.fixed[d] = True
    for d in np.flatnonzero(~a.fixed):
        sl = slice(arr.doc_ptr[d], arr.doc_ptr[d + 1])
        a.pi[d] = canonical_perm(a.upsilon[d], pi0)
        a.z[sl] = order_bag(a.u[sl], a.pi[d])
    state.counts = rebuild_counts(corpus, a, K, state.T)
    return state


def apply_supervision(state: ModelState, labeled: Sequence[int], rng: np.random.Generator) -> ModelState:
    """Estimate the canonical ordering from ``labeled`` documents and lock them."""
    docs = state.corpus.documents
    seqs = [[lab + 1 for lab in docs[d].labels] for d in labeled if docs[d].labels is not None]
    state.pi0 = np.array(derive_canonical(seqs, state.K, rng), dtype=np.int64) - 1
    return lock_labeled(state, labeled)


def load_split(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [str(x) for x in json.load(fh)["labeled_ids"]]


def write_split(labeled_ids: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"labeled_ids": list(labeled_ids)}, fh)
