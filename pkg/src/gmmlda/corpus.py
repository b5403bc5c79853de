"""Corpus loading, preprocessing and persistence.

Documents are sequences of sentences; sentences are sequences of tokens.
Input is pre-tokenized JSONL, one document per line::

    {"id": "doc-1", "sentences": [{"tokens": ["a", "b"], "label": "Method"}]}
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files."""


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    sentences: tuple[tuple[str, ...], ...]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.sentences):
            raise CorpusFormatError(
                f"label count mismatch in document {self.doc_id!r}: "
                f"{len(self.labels)} labels for {len(self.sentences)} sentences"
            )


@dataclass(frozen=True)
class RawCorpus:
    documents: tuple[RawDocument, ...] = ()

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise CorpusFormatError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def __len__(self):
        return len(self.documents)


class Vocabulary:
    """Bijection between word strings and integer ids in ``[0, V)``."""

    def __init__(self, words: Iterable[str] = ()):
        self._words: list[str] = []
        self._ids: dict[str, int] = {}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        idx = self._ids.get(word)
        if idx is None:
            idx = len(self._words)
            self._ids[word] = idx
            self._words.append(word)
        return idx

    def id(self, word: str) -> int:
        return self._ids[word]

    def word(self, idx: int) -> str:
        return self._words[idx]

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def __contains__(self, word):
        return word in self._ids

    def __len__(self):
        return len(self._words)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._words == other._words

    def __repr__(self):
        return f"Vocabulary(V={len(self)})"


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[tuple[int, ...], ...]
    labels: Optional[tuple[int, ...]] = None


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable, vocabulary-indexed corpus.

    ``labels`` on a document hold 0-based intent ids indexing ``label_set``.
    """

    documents: tuple[Document, ...]
    vocabulary: Vocabulary
    label_set: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        V = len(self.vocabulary)
        K = len(self.label_set) if self.label_set is not None else None
        for doc in self.documents:
            for sent in doc.sentences:
                for w in sent:
                    if not 0 <= w < V:
                        raise ValueError(f"token id {w} outside vocabulary of size {V}")
            if doc.labels is not None:
                if K is None:
                    raise ValueError("document labels given without a label_set")
                if len(doc.labels) != len(doc.sentences):
                    raise ValueError(f"label count mismatch in document {doc.doc_id!r}")
                if any(not 0 <= lab < K for lab in doc.labels):
                    raise ValueError(f"label id outside [0, {K}) in document {doc.doc_id!r}")

    def __len__(self):
        return len(self.documents)

    @property
    def V(self) -> int:
        return len(self.vocabulary)

    @property
    def has_labels(self) -> bool:
        return any(doc.labels is not None for doc in self.documents)

    @cached_property
    def arrays(self) -> "CorpusArrays":
        return CorpusArrays.from_documents(self.documents)

    def sentence_labels(self) -> np.ndarray:
        """Flat array of 0-based labels per sentence; -1 where unlabeled."""
        out = []
        for doc in self.documents:
            if doc.labels is None:
                out.extend([-1] * len(doc.sentences))
            else:
                out.extend(doc.labels)
        return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class CorpusArrays:
    """Flat CSR-style layout used by the sampler kernels.

    ``words[sent_ptr[s]:sent_ptr[s+1]]`` are the tokens of global sentence
    ``s``; ``doc_ptr[d]:doc_ptr[d+1]`` are the global sentence ids of
    document ``d``.
    """

    words: np.ndarray
    sent_ptr: np.ndarray
    doc_ptr: np.ndarray
    token_doc: np.ndarray
    token_sent: np.ndarray

    @classmethod
    def from_documents(cls, documents: Sequence[Document]) -> "CorpusArrays":
        words, sent_ptr, doc_ptr, token_doc, token_sent = [], [0], [0], [], []
        s = 0
        for d, doc in enumerate(documents):
            for sent in doc.sentences:
                words.extend(sent)
                token_doc.extend([d] * len(sent))
                token_sent.extend([s] * len(sent))
                sent_ptr.append(len(words))
                s += 1
            doc_ptr.append(s)
        as64 = lambda x: np.asarray(x, dtype=np.int64)
        return cls(as64(words), as64(sent_ptr), as64(doc_ptr), as64(token_doc), as64(token_sent))

    @property
    def n_docs(self) -> int:
        return len(self.doc_ptr) - 1

    @property
    def n_sentences(self) -> int:
        return len(self.sent_ptr) - 1

    @property
    def n_tokens(self) -> int:
        return len(self.words)


@dataclass
class PreprocessConfig:
    stopword_list: frozenset = field(default_factory=frozenset)
    min_token_count: int = 3
    min_sentence_tokens: int = 5
    drop_non_alphabetic: bool = True
    drop_length_one: bool = True

    def __post_init__(self):
        if self.min_token_count < 1:
            raise ValueError("min_token_count must be >= 1")
        if self.min_sentence_tokens < 1:
            raise ValueError("min_sentence_tokens must be >= 1")
        self.stopword_list = frozenset(w.lower() for w in self.stopword_list)

    @classmethod
    def unfiltered(cls) -> "PreprocessConfig":
        """Keep every token and sentence; only index the vocabulary."""
        return cls(min_token_count=1, min_sentence_tokens=1,
                   drop_non_alphabetic=False, drop_length_one=False)


@dataclass(frozen=True)
class CorpusStats:
    docs: int
    sentences: int
    vocab: int
    tokens: int


def _parse_document(obj, lineno: int) -> RawDocument:
    if not isinstance(obj, dict) or "id" not in obj or "sentences" not in obj:
        raise CorpusFormatError(f"line {lineno}: expected object with 'id' and 'sentences'")
    sentences, labels = [], []
    for sent in obj["sentences"]:
        if not isinstance(sent, dict) or not isinstance(sent.get("tokens"), list):
            raise CorpusFormatError(f"line {lineno}: sentence must be an object with a 'tokens' list")
        sentences.append(tuple(str(tok) for tok in sent["tokens"]))
        labels.append(sent.get("label"))
    present = [lab is not None for lab in labels]
    if any(present) and not all(present):
        raise CorpusFormatError(
            f"line {lineno}: label count mismatch in document {obj['id']!r}: "
            f"{sum(present)} labels for {len(sentences)} sentences"
        )
    doc_labels = tuple(str(lab) for lab in labels) if labels and all(present) else None
    try:
        return RawDocument(str(obj["id"]), tuple(sentences), doc_labels)
    except CorpusFormatError as exc:
        raise CorpusFormatError(f"line {lineno}: {exc}") from None


def load_corpus(path, format: str = "jsonl") -> RawCorpus:
    """Read a pre-tokenized corpus file, preserving document and sentence order."""
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    docs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: {exc.msg}") from None
            doc = _parse_document(obj, lineno)
            if doc.doc_id in seen:
                raise CorpusFormatError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return RawCorpus(tuple(docs))


def load_stopwords(path) -> frozenset:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                words.add(line.lower())
    return frozenset(words)


def _token_filter(cfg: PreprocessConfig):
    def keep(tok: str) -> bool:
        if tok in cfg.stopword_list:
            return False
        if cfg.drop_non_alphabetic and not tok.isalpha():
            return False
        if cfg.drop_length_one and len(tok) == 1:
            return False
        return True
    return keep


def preprocess(raw: RawCorpus, cfg: Optional[PreprocessConfig] = None) -> Corpus:
    """Filter tokens and sentences, then index the surviving vocabulary.

    Filters run as: lowercase, stopwords, non-alphabetic, length one,
    min-count, short sentences.  Dropping sentences lowers corpus counts, so
    the last two filters repeat until nothing changes; this makes the result
    a fixed point (preprocessing it again is a no-op).
    """
    cfg = cfg or PreprocessConfig()
    keep = _token_filter(cfg)

    # (doc_id, [(tokens, label)])
    docs = []
    for doc in raw.documents:
        labels = doc.labels if doc.labels is not None else (None,) * len(doc.sentences)
        sents = [([t for t in (tok.lower() for tok in sent) if keep(t)], lab)
                 for sent, lab in zip(doc.sentences, labels)]
        docs.append((doc.doc_id, sents, doc.labels is not None))

    while True:
        freq = Counter(t for _, sents, _ in docs for toks, _ in sents for t in toks)
        changed = False
        new_docs = []
        for doc_id, sents, labeled in docs:
            kept = []
            for toks, lab in sents:
                filtered = [t for t in toks if freq[t] >= cfg.min_token_count]
                if len(filtered) != len(toks):
                    changed = True
                if len(filtered) >= cfg.min_sentence_tokens:
                    kept.append((filtered, lab))
                else:
                    changed = True
            if kept:
                new_docs.append((doc_id, kept, labeled))
        docs = new_docs
        if not changed:
            break

    vocab = Vocabulary()
    label_names = sorted({lab for _, sents, labeled in docs if labeled for _, lab in sents})
    label_ids = {lab: i for i, lab in enumerate(label_names)}
    out = []
    for doc_id, sents, labeled in docs:
        sentences = tuple(tuple(vocab.add(t) for t in toks) for toks, _ in sents)
        labels = tuple(label_ids[lab] for _, lab in sents) if labeled else None
        out.append(Document(doc_id, sentences, labels))
    return Corpus(tuple(out), vocab, tuple(label_names) if label_names else None)


def corpus_stats(c: Corpus) -> CorpusStats:
    sentences = sum(len(doc.sentences) for doc in c.documents)
    tokens = sum(len(s) for doc in c.documents for s in doc.sentences)
    return CorpusStats(len(c.documents), sentences, len(c.vocabulary), tokens)


def to_raw(c: Corpus) -> RawCorpus:
    """Map an indexed corpus back to token strings."""
    vocab = c.vocabulary
    docs = []
    for doc in c.documents:
        labels = None
        if doc.labels is not None:
            labels = tuple(c.label_set[lab] for lab in doc.labels)
        sents = tuple(tuple(vocab.word(w) for w in sent) for sent in doc.sentences)
        docs.append(RawDocument(doc.doc_id, sents, labels))
    return RawCorpus(tuple(docs))


def save_corpus(c: Corpus, corpus_path, vocab_path=None) -> None:
    """Write the JSONL dump plus the ``{"words": [...]}`` vocabulary sidecar."""
    corpus_path = Path(corpus_path)
    if vocab_path is None:
        vocab_path = corpus_path.with_suffix(".vocab.json")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for doc in to_raw(c).documents:
            sents = []
            for i, sent in enumerate(doc.sentences):
                entry = {"tokens": list(sent)}
                if doc.labels is not None:
                    entry["label"] = doc.labels[i]
                sents.append(entry)
            fh.write(json.dumps({"id": doc.doc_id, "sentences": sents}) + "\n")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        json.dump({"words": c.vocabulary.words}, fh)


def load_preprocessed(corpus_path, vocab_path=None, label_set: Optional[Sequence[str]] = None) -> Corpus:
    """Load a dump written by :func:`save_corpus` with its exact id mapping."""
    corpus_path = Path(corpus_path)
    if vocab_path is None:
        vocab_path = corpus_path.with_suffix(".vocab.json")
    with open(vocab_path, encoding="utf-8") as fh:
        vocab = Vocabulary(json.load(fh)["words"])
    raw = load_corpus(corpus_path)
    if label_set is None:
        names = sorted({lab for doc in raw.documents if doc.labels for lab in doc.labels})
        label_set = tuple(names) if names else None
    label_ids = {lab: i for i, lab in enumerate(label_set or ())}
    docs = []
    for doc in raw.documents:
        try:
            sentences = tuple(tuple(vocab.id(t) for t in sent) for sent in doc.sentences)
        except KeyError as exc:
            raise CorpusFormatError(f"token {exc.args[0]!r} missing from vocabulary file") from None
        labels = None
        if doc.labels is not None:
            labels = tuple(label_ids[lab] for lab in doc.labels)
        docs.append(Document(doc.doc_id, sentences, labels))
    return Corpus(tuple(docs), vocab, tuple(label_set) if label_set else None)
