"""Collapsed Gibbs sampling over ``u``, ``rho``, ``upsilon`` and ``(b, t)``.

Single-site moves take document / sentence / token indices local to their
parent (``s`` within document ``d``, ``m`` within sentence ``s``).  The
sweep itself runs in compiled code; see :mod:`gmmlda._kernels`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as kn
from .model import ModelState, Variant, joint_log_score, mixed_type_fraction

logger = logging.getLogger(__name__)


@dataclass
class GibbsConfig:
    iterations: int = 2000
    seed: int = 0
    report_every: int = 100
    prediction: str = "last_sample"  # or "mode_over_tail"
    tail_n: int = 100
    check_counts: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.report_every < 1:
            raise ValueError("report_every must be >= 1")
        if self.prediction not in ("last_sample", "mode_over_tail"):
            raise ValueError(f"unknown prediction mode {self.prediction!r}")
        if self.prediction == "mode_over_tail" and not 1 <= self.tail_n <= self.iterations:
            raise ValueError("tail_n must be in [1, iterations]")


@dataclass
class ChainDiagnostics:
    iteration: list = field(default_factory=list)
    joint_log_score: list = field(default_factory=list)
    intent_fraction: list = field(default_factory=list)
    mean_rho: list = field(default_factory=list)
    mixed_fraction: list = field(default_factory=list)

    def record(self, it: int, state: ModelState) -> None:
        fb = state.counts.fb
        total = int(fb.sum())
        self.iteration.append(it)
        self.joint_log_score.append(joint_log_score(state))
        self.intent_fraction.append(fb[0] / total if total else 0.0)
        self.mean_rho.append(float(np.mean(state.rho)) if len(state.rho) else 0.0)
        self.mixed_fraction.append(mixed_type_fraction(state.counts.nv))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "joint_log_score", "intent_fraction", "mean_rho"])
            for row in zip(self.iteration, self.joint_log_score, self.intent_fraction, self.mean_rho):
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])


# -- packing ----------------------------------------------------------------

def _pack(state: ModelState):
    arr = state.corpus.arrays
    a, c, h = state.assignments, state.counts, state.hyper
    C = (arr.words, arr.sent_ptr, arr.doc_ptr)
    A = (a.u, a.z, a.upsilon, a.pi, state.pi0, a.b, a.t, a.fixed)
    F = (c.f0, c.f0_dot, c.f1, c.f1_dot, c.f1_doc, c.f1_doc_dot, c.fu, c.fb, c.nv)
    hp = np.array([h.alpha0, h.beta0, h.theta0, h.lambda0, h.gamma0, h.c], dtype=float)
    return C, A, F, hp


def _global_sentence(state: ModelState, d: int, s: int) -> int:
    ptr = state.corpus.arrays.doc_ptr
    g = ptr[d] + s
    if not 0 <= s or g >= ptr[d + 1]:
        raise IndexError(f"sentence {s} outside document {d}")
    return int(g)


def _global_token(state: ModelState, d: int, s: int, m: int) -> tuple[int, int]:
    g = _global_sentence(state, d, s)
    ptr = state.corpus.arrays.sent_ptr
    n = ptr[g] + m
    if not 0 <= m or n >= ptr[g + 1]:
        raise IndexError(f"token {m} outside sentence {s} of document {d}")
    return int(n), g


def _normalize(logw: np.ndarray) -> np.ndarray:
    p = np.exp(logw - logw.max())
    return p / p.sum()


# -- conditionals -----------------------------------------------------------

def u_conditional(state: ModelState, d: int, s: int) -> np.ndarray:
    """Normalized conditional over the K values of bag element ``s`` of document ``d``."""
    C, A, F, hp = _pack(state)
    out = np.empty(state.K)
    kn.u_logweights(d, _global_sentence(state, d, s), C, A, F, hp, out)
    return _normalize(out)


def upsilon_weights(state: ModelState, d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Log prior and unnormalized log conditional for inversion component ``k`` (1-based)."""
    if not 1 <= k <= state.K - 1:
        raise ValueError(f"component {k} outside [1, {state.K - 1}]")
    C, A, F, hp = _pack(state)
    n = state.K - k + 1
    prior, out = np.empty(state.K), np.empty(state.K)
    kn.ups_logweights(d, k - 1, C, A, F, hp, state.rho, prior, out)
    return prior[:n], out[:n]


def upsilon_conditional(state: ModelState, d: int, k: int) -> np.ndarray:
    return _normalize(upsilon_weights(state, d, k)[1])


def bt_logweights(state: ModelState, d: int, s: int, m: int, entropic: bool = False) -> np.ndarray:
    """Unnormalized log weights over ``[intent, topic 1, ..., topic T]`` for one token."""
    n, g = _global_token(state, d, s, m)
    C, A, F, hp = _pack(state)
    out = np.empty(state.T + 1)
    kn.bt_logweights(n, d, g, C, A, F, hp, entropic, out)
    return out


def bt_conditional(state: ModelState, d: int, s: int, m: int, entropic: bool = False) -> np.ndarray:
    return _normalize(bt_logweights(state, d, s, m, entropic))


def word_entropy(nv0: int, nv1: int) -> float:
    """Entropy in nats of a word's intent/topic type split."""
    if nv0 < 0 or nv1 < 0 or nv0 + nv1 < 1:
        raise ValueError("word_entropy needs nv0 + nv1 >= 1")
    return kn.word_entropy_nb(nv0, nv1)


# -- single-site moves ------------------------------------------------------

def resample_u(state: ModelState, d: int, s: int, rng: np.random.Generator) -> ModelState:
    if state.assignments.fixed[d]:
        raise ValueError(f"document {d} is label-locked")
    C, A, F, hp = _pack(state)
    kn.u_doc_block(d, C, A, F, hp, rng, _global_sentence(state, d, s))
    return state


def resample_upsilon(state: ModelState, d: int, k: int, rng: np.random.Generator) -> ModelState:
    """Resample inversion component ``k`` (1-based) of document ``d``."""
    if state.assignments.fixed[d]:
        raise ValueError(f"document {d} is label-locked")
    if not 1 <= k <= state.K - 1:
        raise ValueError(f"component {k} outside [1, {state.K - 1}]")
    C, A, F, hp = _pack(state)
    kn.ups_doc_block(d, C, A, F, hp, state.rho, rng, k - 1)
    return state


def resample_rho(state: ModelState, rng: np.random.Generator) -> ModelState:
    if state.hyper.variant is Variant.UNIFORM_ORDER:
        return state
    _, A, _, _ = _pack(state)
    kn.rho_block(A, state.rho, state.hyper.prior_means(), state.nu0, rng)
    return state


def resample_bt(state: ModelState, d: int, s: int, m: int, rng: np.random.Generator) -> ModelState:
    if state.hyper.variant is Variant.INTENT_ONLY:
        raise ValueError("the intent_only variant fixes b to 0")
    n, g = _global_token(state, d, s, m)
    C, A, F, hp = _pack(state)
    kn.bt_token(n, d, g, C, A, F, hp, False, rng, np.empty(state.T + 1))
    return state


def resample_bt_entropic(state: ModelState, d: int, s: int, m: int, rng: np.random.Generator) -> ModelState:
    if state.hyper.variant is Variant.INTENT_ONLY:
        raise ValueError("the intent_only variant fixes b to 0")
    n, g = _global_token(state, d, s, m)
    C, A, F, hp = _pack(state)
    kn.bt_token(n, d, g, C, A, F, hp, True, rng, np.empty(state.T + 1))
    return state


def sweep(state: ModelState, rng: np.random.Generator, entropic: Optional[bool] = None) -> ModelState:
    """One full Gibbs scan.  ``entropic`` defaults to ``c > 0``."""
    h = state.hyper
    if entropic is None:
        entropic = h.c > 0
    C, A, F, hp = _pack(state)
    kn.sweep(C, A, F, hp, state.rho, h.prior_means(), float(state.nu0),
             h.variant is not Variant.UNIFORM_ORDER,
             h.variant is not Variant.INTENT_ONLY,
             bool(entropic), rng)
    return state


def run_gibbs(state: ModelState, cfg: GibbsConfig, rng: Optional[np.random.Generator] = None):
    """Run ``cfg.iterations`` sweeps.

    Returns ``(state, diagnostics, predictions)`` where predictions are
    0-based per-sentence intents (flat over the corpus).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    diag = ChainDiagnostics()
    tally = None
    if cfg.prediction == "mode_over_tail":
        tally = np.zeros((len(state.assignments.z), state.K), dtype=np.int64)
    rows = np.arange(len(state.assignments.z))
    for it in range(1, cfg.iterations + 1):
        sweep(state, rng)
        if tally is not None and it > cfg.iterations - cfg.tail_n:
            tally[rows, state.assignments.z] += 1
        if it % cfg.report_every == 0 or it == cfg.iterations:
            if cfg.check_counts:
                state.check_counts()
            diag.record(it, state)
            logger.info("iter %d  score %.3f  intent %.3f  rho %.3f", it,
                        diag.joint_log_score[-1], diag.intent_fraction[-1], diag.mean_rho[-1])
    if tally is None:
        pred = state.assignments.z.copy()
    else:
        pred = tally.argmax(axis=1)
        # locked documents keep their labels
        arr = state.corpus.arrays
        for d in np.flatnonzero(state.assignments.fixed):
            sl = slice(arr.doc_ptr[d], arr.doc_ptr[d + 1])
            pred[sl] = state.assignments.z[sl]
    return state, diag, pred
