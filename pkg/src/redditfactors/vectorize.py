"""Tokenization, vocabulary building and TF-IDF weighting.

Documents enter as unigram token lists. Stopword unigrams are removed first
and n-grams are then formed from what remains, so ``"to the moon"`` yields
only ``"moon"``.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DEFAULT_NGRAM_RANGE = (1, 2)
DEFAULT_MIN_DF = 2

_TOKEN = re.compile(r"[A-Za-z0-9]+")


class EmptyVocabularyError(ValueError):
    pass


class EmptyDocumentError(ValueError):
    pass


class UnknownTermError(KeyError):
    pass


def load_stopwords(path=None) -> frozenset:
    """Read a one-word-per-line stopword file (bundled English list by default)."""
    if path is None:
        text = resources.files("redditfactors").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def _ngrams(tokens: Sequence[str], ngram_range) -> list:
    lo, hi = ngram_range
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid ngram_range {ngram_range}")
    out = []
    for n in range(lo, hi + 1):
        out.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return out


def tokenize(body: str, ngram_range=(1, 1)) -> list:
    """Split on non-alphanumerics and emit every contiguous n-gram.

    >>> tokenize("buy msft now", (1, 2))
    ['buy', 'msft', 'now', 'buy msft', 'msft now']
    """
    return _ngrams(_TOKEN.findall(body), ngram_range)


def document_terms(tokens: Sequence[str], stopwords=frozenset(),
                   ngram_range=DEFAULT_NGRAM_RANGE) -> list:
    """Drop stopword unigrams, then build n-grams over the surviving stream."""
    kept = [t for t in tokens if t not in stopwords]
    return _ngrams(kept, ngram_range)


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple
    df: np.ndarray
    n_docs: int
    stopwords: frozenset = frozenset()
    ngram_range: tuple = DEFAULT_NGRAM_RANGE
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})
        if len(self.index) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def terms_of(self, tokens: Sequence[str]) -> list:
        return document_terms(tokens, self.stopwords, self.ngram_range)


def build_vocabulary(docs: Sequence[Sequence[str]], stopwords=frozenset(),
                     min_df: int = DEFAULT_MIN_DF,
                     ngram_range=DEFAULT_NGRAM_RANGE) -> Vocabulary:
    """Collect the n-gram vocabulary of a corpus of unigram token lists.

    Terms are sorted lexicographically; those present in fewer than
    ``min_df`` documents are dropped.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    stopwords = frozenset(stopwords)
    df = Counter()
    for tokens in docs:
        df.update(set(document_terms(tokens, stopwords, ngram_range)))
    terms = sorted(t for t, c in df.items() if c >= min_df)
    if not terms:
        raise EmptyVocabularyError("no terms survive stopword and min_df filtering")
    return Vocabulary(
        terms=tuple(terms),
        df=np.array([df[t] for t in terms], dtype=np.int64),
        n_docs=len(docs),
        stopwords=stopwords,
        ngram_range=tuple(ngram_range),
    )


def term_frequency(doc: Sequence[str], term: str) -> float:
    """Share of the document's terms equal to ``term``."""
    if len(doc) == 0:
        raise EmptyDocumentError("term frequency of an empty document is undefined")
    return sum(1 for t in doc if t == term) / len(doc)


def inverse_document_frequency(vocab: Vocabulary, term: str) -> float:
    """``ln(n_docs / df) + 1``."""
    try:
        i = vocab.index[term]
    except KeyError:
        raise UnknownTermError(term) from None
    return math.log(vocab.n_docs / vocab.df[i]) + 1.0


def idf_vector(vocab: Vocabulary) -> np.ndarray:
    return np.log(vocab.n_docs / vocab.df.astype(float)) + 1.0


@dataclass(frozen=True)
class TermDocumentMatrix:
    """Sparse ``m terms x n documents`` TF-IDF matrix."""

    weights: sp.csc_matrix
    vocab: Vocabulary
    doc_ids: tuple

    @property
    def shape(self):
        return self.weights.shape

    def dense(self) -> np.ndarray:
        return self.weights.toarray()


def tfidf_matrix(docs: Sequence[Sequence[str]], vocab: Vocabulary,
                 doc_ids: Sequence[str] | None = None) -> TermDocumentMatrix:
    """Weight every (term, document) pair by tf * idf.

    ``docs`` are the same unigram token lists the vocabulary was built from.
    Documents left empty after stopword removal get an all-zero column.
    """
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(docs))]
    if len(doc_ids) != len(docs):
        raise ValueError(f"dimension mismatch: {len(docs)} docs but {len(doc_ids)} ids")
    if len(docs) != vocab.n_docs:
        raise ValueError(
            f"dimension mismatch: vocabulary built on {vocab.n_docs} docs, got {len(docs)}"
        )
    idf = idf_vector(vocab)
    rows, cols, vals = [], [], []
    for j, tokens in enumerate(docs):
        terms = vocab.terms_of(tokens)
        if not terms:
            continue
        counts = Counter(t for t in terms if t in vocab.index)
        total = len(terms)
        for t in sorted(counts, key=vocab.index.__getitem__):
            i = vocab.index[t]
            rows.append(i)
            cols.append(j)
            vals.append(counts[t] / total * idf[i])
    A = sp.csc_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(vocab), len(docs)),
    )
    A.sort_indices()
    return TermDocumentMatrix(A, vocab, tuple(str(d) for d in doc_ids))


def vectorize(bodies: Iterable[str], stopwords=frozenset(), min_df: int = DEFAULT_MIN_DF,
              ngram_range=DEFAULT_NGRAM_RANGE, doc_ids=None) -> TermDocumentMatrix:
    """Convenience wrapper: tokenize, build the vocabulary, weight."""
    docs = [tokenize(b) for b in bodies]
    vocab = build_vocabulary(docs, stopwords, min_df=min_df, ngram_range=ngram_range)
    return tfidf_matrix(docs, vocab, doc_ids)


def dump_matrix(tdm: TermDocumentMatrix, prefix) -> tuple:
    """Write ``<prefix>.triplets.csv`` and ``<prefix>.vocab.csv``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    trip = prefix.with_name(prefix.name + ".triplets.csv")
    voc = prefix.with_name(prefix.name + ".vocab.csv")
    coo = tdm.weights.tocoo()
    order = np.lexsort((coo.row, coo.col))
    with trip.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term_index", "doc_index", "weight"])
        for k in order:
            w.writerow([int(coo.row[k]), int(coo.col[k]), repr(float(coo.data[k]))])
    with voc.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "term", "df"])
        for i, t in enumerate(tdm.vocab.terms):
            w.writerow([i, t, int(tdm.vocab.df[i])])
    return trip, voc
