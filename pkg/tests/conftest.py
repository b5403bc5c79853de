import numpy as np
import pytest

from gmmlda.corpus import Corpus, Document, Vocabulary
from gmmlda.model import Hyperparameters, init_state


def make_corpus(docs, V, labels=None, K=None):
    """Corpus from nested lists of word ids; ``labels`` are 0-based per document."""
    vocab = Vocabulary(f"w{chr(97 + i // 26)}{chr(97 + i % 26)}" for i in range(V))
    out = []
    for d, doc in enumerate(docs):
        lab = tuple(labels[d]) if labels is not None and labels[d] is not None else None
        out.append(Document(f"d{d}", tuple(tuple(s) for s in doc), lab))
    label_set = tuple(str(k + 1) for k in range(K)) if labels is not None else None
    return Corpus(tuple(out), vocab, label_set)


def random_docs(rng, D, V, max_sent=4, max_tok=5):
    return [[list(rng.integers(0, V, size=rng.integers(1, max_tok + 1)))
             for _ in range(rng.integers(1, max_sent + 1))] for _ in range(D)]


TOY_DOCS = [[[0, 1], [2, 3]], [[0, 2], [1, 3]]]


@pytest.fixture
def toy_corpus():
    return make_corpus(TOY_DOCS, V=4)


@pytest.fixture
def toy_hyper():
    return Hyperparameters(K=2, T=2)


@pytest.fixture
def random_state():
    rng = np.random.default_rng(7)
    corpus = make_corpus(random_docs(rng, D=6, V=9), V=9)
    hyper = Hyperparameters(K=4, T=3, rho0=1.0, c=0.5)
    return init_state(corpus, hyper, rng)


# lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
