"""Model state, count tables, initialization and forward generation.

Intent ids, topic ids and permutations are 0-based inside the state; the
JSON dumps written here use 1-based ids.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import product
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from .corpus import Corpus, Document, Vocabulary
from .permutation import (
    gmm0_logdens_n,
    gmm_logpmf_n,
    inversion_to_perm_arr,
    perm_to_inversion_arr,
    prior_inversion_mean,
    sample_gmm0,
    sample_inversion,
)


class Variant(str, Enum):
    FULL = "full"
    INTENT_ONLY = "intent_only"      # b fixed to 0: intent words only
    UNIFORM_ORDER = "uniform_order"  # rho fixed to 0: uniform over orderings


@dataclass
class Hyperparameters:
    K: int = 5
    T: int = 10
    theta0: float = 0.1
    lambda0: float = 0.1
    alpha0: float = 0.1
    beta0: float = 0.1
    gamma0: float = 1.0
    rho0: float = 2.0
    nu0_scale: float = 0.1
    c: float = 0.0
    variant: Variant = Variant.FULL

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")
        for name in ("theta0", "lambda0", "alpha0", "beta0", "gamma0", "rho0", "nu0_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.c < 0:
            raise ValueError("c must be >= 0")

    def nu0(self, n_docs: int) -> float:
        return self.nu0_scale * n_docs

    def prior_means(self) -> np.ndarray:
        """Prior mean inversion per component, length K-1."""
        return np.array([prior_inversion_mean(self.rho0, k, self.K) for k in range(1, self.K)])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


@dataclass
class Assignments:
    """Latent variables, flat over sentences (``u``, ``z``) and tokens (``b``, ``t``).

    ``t`` is -1 wherever ``b`` is 0.
    """

    u: np.ndarray        # (S,)
    z: np.ndarray        # (S,)
    upsilon: np.ndarray  # (D, K-1)
    pi: np.ndarray       # (D, K)
    b: np.ndarray        # (N,)
    t: np.ndarray        # (N,)
    fixed: np.ndarray    # (D,) bool

    def copy(self) -> "Assignments":
        return Assignments(*(getattr(self, f).copy() for f in self.__dataclass_fields__))


@dataclass
class CountTables:
    f0: np.ndarray          # (K, V) intent-word counts
    f0_dot: np.ndarray      # (K,)
    f1: np.ndarray          # (T, V) topic-word counts
    f1_dot: np.ndarray      # (T,)
    f1_doc: np.ndarray      # (D, T)
    f1_doc_dot: np.ndarray  # (D,)
    fu: np.ndarray          # (K,) intent-label usage in u
    fb: np.ndarray          # (2,) intent / topic word totals
    nv: np.ndarray          # (V, 2) per-word type counts

    def __eq__(self, other):
        if not isinstance(other, CountTables):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in self.__dataclass_fields__)

    def copy(self) -> "CountTables":
        return CountTables(*(getattr(self, f).copy() for f in self.__dataclass_fields__))


@dataclass(eq=False)
class ModelState:
    corpus: Corpus
    hyper: Hyperparameters
    assignments: Assignments
    counts: CountTables
    rho: np.ndarray
    pi0: np.ndarray = None

    def __post_init__(self):
        if self.pi0 is None:
            self.pi0 = np.arange(self.hyper.K, dtype=np.int64)

    @property
    def K(self) -> int:
        return self.hyper.K

    @property
    def T(self) -> int:
        return self.hyper.T

    @property
    def nu0(self) -> float:
        return self.hyper.nu0(len(self.corpus))

    def doc_slice(self, d: int) -> slice:
        ptr = self.corpus.arrays.doc_ptr
        return slice(ptr[d], ptr[d + 1])

    def check_counts(self) -> None:
        rebuilt = rebuild_counts(self.corpus, self.assignments, self.K, self.T)
        if rebuilt != self.counts:
            raise RuntimeError("count tables diverged from assignments")


def rebuild_counts(corpus: Corpus, a: Assignments, K: int, T: int) -> CountTables:
    arr = corpus.arrays
    V, D = corpus.V, arr.n_docs
    w = arr.words
    intent = a.b == 0
    zt = a.z[arr.token_sent]

    f0 = np.zeros((K, V), dtype=np.int64)
    np.add.at(f0, (zt[intent], w[intent]), 1)
    f1 = np.zeros((T, V), dtype=np.int64)
    np.add.at(f1, (a.t[~intent], w[~intent]), 1)
    f1_doc = np.zeros((D, T), dtype=np.int64)
    np.add.at(f1_doc, (arr.token_doc[~intent], a.t[~intent]), 1)
    nv = np.zeros((V, 2), dtype=np.int64)
    np.add.at(nv, (w, a.b), 1)
    return CountTables(
        f0=f0, f0_dot=f0.sum(axis=1), f1=f1, f1_dot=f1.sum(axis=1),
        f1_doc=f1_doc, f1_doc_dot=f1_doc.sum(axis=1),
        fu=np.bincount(a.u, minlength=K).astype(np.int64),
        fb=np.bincount(a.b, minlength=2).astype(np.int64),
        nv=nv,
    )


def canonical_perm(upsilon_row: np.ndarray, pi0: np.ndarray) -> np.ndarray:
    """Document ordering for an inversion vector expressed relative to ``pi0``."""
    sigma = np.empty(len(pi0), dtype=np.int64)
    inversion_to_perm_arr(upsilon_row, sigma)
    return pi0[sigma]


def relative_inversion(pi_row: np.ndarray, pi0: np.ndarray) -> np.ndarray:
    """Inversion vector of ``pi_row`` after relabeling intents by their rank in ``pi0``."""
    rank = np.empty(len(pi0), dtype=np.int64)
    rank[pi0] = np.arange(len(pi0))
    out = np.zeros(len(pi0) - 1, dtype=np.int64)
    perm_to_inversion_arr(rank[pi_row], out)
    return out


def order_bag(u: np.ndarray, pi_row: np.ndarray) -> np.ndarray:
    """0-based compute-z: labels of ``u`` grouped in ``pi_row`` order."""
    counts = np.bincount(u, minlength=len(pi_row))
    return np.repeat(pi_row, counts[pi_row])


def init_state(corpus: Corpus, hyper: Hyperparameters, rng: np.random.Generator) -> ModelState:
    """Uniform-random chain start."""
    K, T = hyper.K, hyper.T
    arr = corpus.arrays
    D, S, N = arr.n_docs, arr.n_sentences, arr.n_tokens
    if corpus.label_set is not None and len(corpus.label_set) > K and corpus.has_labels:
        raise ValueError(f"corpus has {len(corpus.label_set)} labels but K = {K}")

    uniform = hyper.variant is Variant.UNIFORM_ORDER
    rho = np.zeros(K - 1) if uniform else np.full(K - 1, float(hyper.rho0))
    u = rng.integers(0, K, size=S).astype(np.int64)
    upsilon = sample_inversion(rho, rng, size=D).reshape(D, K - 1)
    pi0 = np.arange(K, dtype=np.int64)
    pi = np.stack([canonical_perm(upsilon[d], pi0) for d in range(D)]) if D else np.zeros((0, K), np.int64)
    z = np.empty(S, dtype=np.int64)
    for d in range(D):
        sl = slice(arr.doc_ptr[d], arr.doc_ptr[d + 1])
        z[sl] = order_bag(u[sl], pi[d])
    if hyper.variant is Variant.INTENT_ONLY:
        b = np.zeros(N, dtype=np.int64)
    else:
        b = rng.integers(0, 2, size=N).astype(np.int64)
    t = np.where(b == 1, rng.integers(0, T, size=N), -1).astype(np.int64)
    a = Assignments(u, z, upsilon.astype(np.int64), pi.astype(np.int64), b, t, np.zeros(D, dtype=bool))
    return ModelState(corpus, hyper, a, rebuild_counts(corpus, a, K, T), rho, pi0)


# -- forward generation -----------------------------------------------------

@dataclass
class SyntheticSizes:
    D: int
    V: int
    mean_sentences: float = 8.0
    mean_tokens: float = 10.0

    def draw(self, rng: np.random.Generator, mean: float) -> int:
        return 1 + int(rng.poisson(max(mean - 1.0, 0.0)))


class Synthetic(NamedTuple):
    corpus: Corpus
    truth: Assignments
    params: dict


def synthetic_words(V: int) -> list[str]:
    """``V`` distinct alphabetic words of length >= 2 (``aa``, ``ab``, ...)."""
    letters = string.ascii_lowercase
    width = 2
    while 26 ** width < V:
        width += 1
    return ["".join(p) for _, p in zip(range(V), product(letters, repeat=width))]


def forward_generate(hyper: Hyperparameters, sizes: SyntheticSizes, rng: np.random.Generator,
                     gamma: Optional[float] = None) -> Synthetic:
    """Sample a corpus and its latent structure from the generative model.

    ``gamma`` (probability of a topic word) overrides the Beta draw when given.
    Sentence labels of the returned corpus are the true intents, named
    ``"1".."K"``.
    """
    K, T, V, D = hyper.K, hyper.T, sizes.V, sizes.D
    nu0 = hyper.nu0(D)
    lam = rng.dirichlet(np.full(K, hyper.lambda0))
    if gamma is None:
        gamma = rng.beta(hyper.gamma0, hyper.gamma0)
    if hyper.variant is Variant.INTENT_ONLY:
        gamma = 0.0
    if hyper.variant is Variant.UNIFORM_ORDER:
        rho = np.zeros(K - 1)
    else:
        means = hyper.prior_means()
        rho = np.array([sample_gmm0(means[k - 1], nu0, k, K, rng) for k in range(1, K)])
    alpha = rng.dirichlet(np.full(V, hyper.alpha0), size=K)
    beta = rng.dirichlet(np.full(V, hyper.beta0), size=T)
    pi0 = np.arange(K, dtype=np.int64)

    docs, us, zs, ups_all, pis, bs, ts = [], [], [], [], [], [], []
    thetas = []
    for d in range(D):
        theta = rng.dirichlet(np.full(T, hyper.theta0))
        thetas.append(theta)
        n_sent = sizes.draw(rng, sizes.mean_sentences)
        u = rng.choice(K, size=n_sent, p=lam)
        ups = sample_inversion(rho, rng)
        pi = canonical_perm(ups, pi0)
        z = order_bag(u, pi)
        sentences = []
        for s in range(n_sent):
            m = sizes.draw(rng, sizes.mean_tokens)
            b = (rng.random(m) < gamma).astype(np.int64)
            t = np.where(b == 1, rng.choice(T, size=m, p=theta), -1)
            w = np.empty(m, dtype=np.int64)
            for i in range(m):
                dist = alpha[z[s]] if b[i] == 0 else beta[t[i]]
                w[i] = rng.choice(V, p=dist)
            sentences.append(tuple(int(x) for x in w))
            bs.append(b)
            ts.append(t)
        docs.append(Document(f"doc{d:05d}", tuple(sentences), tuple(int(x) for x in z)))
        us.append(u)
        zs.append(z)
        ups_all.append(ups)
        pis.append(pi)

    corpus = Corpus(tuple(docs), Vocabulary(synthetic_words(V)), tuple(str(k) for k in range(1, K + 1)))
    cat = lambda xs: np.concatenate(xs).astype(np.int64) if xs else np.zeros(0, np.int64)
    truth = Assignments(
        u=cat(us), z=cat(zs),
        upsilon=np.array(ups_all, dtype=np.int64).reshape(D, K - 1),
        pi=np.array(pis, dtype=np.int64).reshape(D, K),
        b=cat(bs), t=cat(ts), fixed=np.zeros(D, dtype=bool),
    )
    params = dict(lam=lam, gamma=gamma, rho=rho, alpha=alpha, beta=beta, theta=np.array(thetas))
    return Synthetic(corpus, truth, params)


# -- estimates and diagnostics ----------------------------------------------

@dataclass
class PointEstimates:
    intent_word_dist: np.ndarray
    topic_word_dist: np.ndarray
    doc_topic_dist: np.ndarray


def point_estimates(state: ModelState) -> PointEstimates:
    h, c, V = state.hyper, state.counts, state.corpus.V
    return PointEstimates(
        intent_word_dist=(c.f0 + h.alpha0) / (c.f0_dot[:, None] + V * h.alpha0),
        topic_word_dist=(c.f1 + h.beta0) / (c.f1_dot[:, None] + V * h.beta0),
        doc_topic_dist=(c.f1_doc + h.theta0) / (c.f1_doc_dot[:, None] + state.T * h.theta0),
    )


def classify_word_types(state_or_nv) -> dict[int, str]:
    """Word id -> ``"intent"`` if seen strictly more often as an intent word, else ``"topic"``."""
    nv = state_or_nv.counts.nv if isinstance(state_or_nv, ModelState) else np.asarray(state_or_nv)
    return {v: "intent" if nv[v, 0] > nv[v, 1] else "topic" for v in range(len(nv))}


def mixed_type_fraction(nv: np.ndarray) -> float:
    """Fraction of vocabulary words observed with both types."""
    seen = nv.sum(axis=1) > 0
    if not seen.any():
        return 0.0
    return float(np.mean((nv[seen, 0] > 0) & (nv[seen, 1] > 0)))


def _dm_log_marginal(counts: np.ndarray, conc: float) -> float:
    """Sum over rows of the symmetric Dirichlet-multinomial log marginal."""
    counts = np.atleast_2d(counts)
    n = counts.shape[1]
    tot = counts.sum(axis=1)
    return float(np.sum(gammaln(n * conc) - gammaln(tot + n * conc))
                 + np.sum(gammaln(counts + conc) - gammaln(conc)))


def joint_log_score(state: ModelState) -> float:
    """Log of the collapsed joint density of ``(u, upsilon, rho, b, t)`` and words, up to a constant."""
    h, c, a = state.hyper, state.counts, state.assignments
    K = h.K
    score = 0.0
    for k in range(K - 1):
        n = K - k
        score += sum(gmm_logpmf_n(float(v), float(state.rho[k]), n) for v in a.upsilon[:, k])
    if h.variant is not Variant.UNIFORM_ORDER:
        means = h.prior_means()
        nu0 = state.nu0
        for k in range(K - 1):
            score += gmm0_logdens_n(float(state.rho[k]), means[k], nu0, K - k)
    score += _dm_log_marginal(c.fu, h.lambda0)
    score += _dm_log_marginal(c.f0, h.alpha0)
    score += _dm_log_marginal(c.f1, h.beta0)
    score += _dm_log_marginal(c.f1_doc, h.theta0)
    if h.variant is not Variant.INTENT_ONLY:
        score += _dm_log_marginal(c.fb, h.gamma0)
    return score


# -- persistence ------------------------------------------------------------

def model_dump(state: ModelState, extra: Optional[dict] = None) -> dict:
    est = point_estimates(state)
    corpus = state.corpus
    out = {
        "K": state.K,
        "T": state.T,
        "rho": [float(r) for r in state.rho],
        "pi0": [int(x) + 1 for x in state.pi0],
        "intent_word_dist": est.intent_word_dist.tolist(),
        "topic_word_dist": est.topic_word_dist.tolist(),
        "hyper": state.hyper.to_dict(),
        "vocab": corpus.vocabulary.words,
        "word_type_counts": state.counts.nv.tolist(),
        "labels": list(corpus.label_set) if corpus.label_set else None,
        "supervised": bool(state.assignments.fixed.any()),
    }
    if extra:
        out.update(extra)
    return out


def assignment_records(state: ModelState, z: Optional[np.ndarray] = None) -> list[dict]:
    """Per-document JSON records with 1-based ids; ``z`` overrides the state's intents."""
    corpus, a = state.corpus, state.assignments
    arr = corpus.arrays
    z = a.z if z is None else z
    records = []
    for d, doc in enumerate(corpus.documents):
        sl = state.doc_slice(d)
        b_rows, t_rows = [], []
        for s in range(sl.start, sl.stop):
            ts = slice(arr.sent_ptr[s], arr.sent_ptr[s + 1])
            b_rows.append([int(x) for x in a.b[ts]])
            t_rows.append([int(x) + 1 if x >= 0 else None for x in a.t[ts]])
        records.append({
            "id": doc.doc_id,
            "z": [int(x) + 1 for x in z[sl]],
            "pi": [int(x) + 1 for x in a.pi[d]],
            "u": sorted(int(x) + 1 for x in a.u[sl]),
            "b": b_rows,
            "t": t_rows,
        })
    return records


def write_assignments(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_assignments(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_model(dump: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dump, fh)


def read_model(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
