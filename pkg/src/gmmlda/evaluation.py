"""Clustering and classification metrics.

Pair-counting quantities are accumulated as integers and combined with
exact rational arithmetic, so results do not depend on summation order.
"""

from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np


class PRF(NamedTuple):
    recall: float
    precision: float
    fscore: float


def _pairs(n):
    n = np.asarray(n, dtype=object)
    return int(np.sum(n * (n - 1) // 2)) if n.size else 0


def _contingency(pred: Sequence, truth: Sequence) -> np.ndarray:
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(truth)}")
    _, pi = np.unique(np.asarray(pred, dtype=object).astype(str), return_inverse=True)
    _, ti = np.unique(np.asarray(truth, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def _pair_counts(pred, truth):
    table = _contingency(pred, truth)
    both = _pairs(table.ravel())
    pred_pairs = _pairs(table.sum(axis=1))
    truth_pairs = _pairs(table.sum(axis=0))
    return both, pred_pairs, truth_pairs, _pairs([len(pred)])


def adjusted_rand_index(pred: Sequence, truth: Sequence) -> float:
    both, sa, sb, total = _pair_counts(pred, truth)
    if total == 0:
        return 1.0
    expected = Fraction(sa * sb, total)
    maximum = Fraction(sa + sb, 2)
    if maximum == expected:
        # both partitions trivial in the same way
        return 1.0
    return float((both - expected) / (maximum - expected))


def pairwise_prf(pred: Sequence, truth: Sequence) -> PRF:
    """Pair-counting recall, precision and F-score (0/0 taken as 0)."""
    if len(pred) < 2:
        raise ValueError("pairwise metrics need at least 2 elements")
    both, sa, sb, _ = _pair_counts(pred, truth)
    precision = Fraction(both, sa) if sa else Fraction(0)
    recall = Fraction(both, sb) if sb else Fraction(0)
    f = 2 * precision * recall / (precision + recall) if precision and recall else Fraction(0)
    return PRF(float(recall), float(precision), float(f))


def accuracy(pred: Sequence, truth: Sequence) -> float:
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if not len(pred):
        return 0.0
    return float(np.mean([p == t for p, t in zip(pred, truth)]))


def clustering_report(pred: Sequence, truth: Sequence, with_accuracy: bool = False) -> dict:
    prf = pairwise_prf(pred, truth)
    out = {"ari": adjusted_rand_index(pred, truth), "recall": prf.recall,
           "precision": prf.precision, "fscore": prf.fscore}
    if with_accuracy:
        out["accuracy"] = accuracy(pred, truth)
    return out


def mean_report(runs: Sequence[dict]) -> dict:
    """Mean of every numeric key present in all runs."""
    keys = [k for k in runs[0]
            if all(k in r and isinstance(r[k], (int, float)) for r in runs)]
    return {k: float(np.mean([r[k] for r in runs])) for k in keys}
