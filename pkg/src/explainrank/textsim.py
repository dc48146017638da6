"""Tokenization, sentence vectors, and the cosine similarity used everywhere.

Two vector backends share one interface: TF-IDF built over the corpus at
hand (the self-contained default) and externally trained word vectors
loaded from a word2vec-style text file. Both are deterministic and
immutable once built, so they are safe to share across worker threads.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import Corpus, Question, answer_text
from .errors import DataError, FormatError

log = logging.getLogger(__name__)

TFIDF = "tfidf"
DENSE = "dense"

# Fixed list, versioned in the README; reproducibility matters more here
# than linguistic coverage.
STOPWORDS = frozenset(
    "a an and are as at be been by do does for from had has have how in into "
    "is it its of on or that the their then there these this to was were "
    "what which will with".split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, *, drop_stopwords: bool = False) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    tokens = _TOKEN_RE.findall(text.lower())
    if drop_stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    return tokens


@dataclass(frozen=True)
class SparseVector:
    weights: Mapping[int, float]
    norm: float


@dataclass(frozen=True)
class DenseVector:
    values: np.ndarray
    norm: float


SentenceVector = SparseVector | DenseVector


def sparse_vector(weights: Mapping[int, float]) -> SparseVector:
    return SparseVector(weights, math.sqrt(sum(w * w for w in weights.values())))


def dense_vector(values) -> DenseVector:
    arr = np.asarray(values, dtype=float)
    return DenseVector(arr, float(np.linalg.norm(arr)))


def cosine(u: SentenceVector, v: SentenceVector) -> float:
    """Cosine similarity; a zero vector compares as 0.0 so out-of-vocabulary
    sentences still rank instead of crashing."""
    if isinstance(u, SparseVector) and isinstance(v, SparseVector):
        if u.norm == 0.0 or v.norm == 0.0:
            return 0.0
        common = u.weights.keys() & v.weights.keys()
        # summing in sorted term order keeps cosine(u, v) == cosine(v, u) exact
        dot = sum(u.weights[t] * v.weights[t] for t in sorted(common))
        return dot / (u.norm * v.norm)
    if isinstance(u, DenseVector) and isinstance(v, DenseVector):
        if u.values.shape != v.values.shape:
            raise DataError(
                f"dimension mismatch: {u.values.shape[0]} vs {v.values.shape[0]}"
            )
        if u.norm == 0.0 or v.norm == 0.0:
            return 0.0
        return float(np.dot(u.values, v.values)) / (u.norm * v.norm)
    raise DataError("cannot compare sparse and dense sentence vectors")


class TfidfProvider:
    """TF-IDF sentence vectors over a fixed vocabulary.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the N build texts; a sentence
    vector is raw term count times idf, restricted to the build vocabulary.
    """

    mode = TFIDF

    def __init__(self, texts: Iterable[str], *, drop_stopwords: bool = True):
        self.drop_stopwords = drop_stopwords
        self.term_ids: dict[str, int] = {}
        df: Counter[str] = Counter()
        n_texts = 0
        for text in texts:
            n_texts += 1
            seen: set[str] = set()
            for token in tokenize(text, drop_stopwords=drop_stopwords):
                if token in seen:
                    continue
                seen.add(token)
                if token not in self.term_ids:
                    self.term_ids[token] = len(self.term_ids)
                df[token] += 1
        if not self.term_ids:
            raise DataError("cannot build TF-IDF vectors: no tokens in any input text")
        self.idf = {
            token: math.log((1 + n_texts) / (1 + df[token])) + 1.0 for token in self.term_ids
        }
        self._cache: dict[str, SparseVector] = {}

    def vector(self, text: str) -> SparseVector:
        cached = self._cache.get(text)
        if cached is None:
            weights: dict[int, float] = {}
            for token, count in Counter(
                tokenize(text, drop_stopwords=self.drop_stopwords)
            ).items():
                term_id = self.term_ids.get(token)
                if term_id is not None:
                    weights[term_id] = count * self.idf[token]
            cached = sparse_vector(weights)
            self._cache[text] = cached
        return cached


def build_tfidf(texts: Iterable[str], *, drop_stopwords: bool = True) -> TfidfProvider:
    return TfidfProvider(texts, drop_stopwords=drop_stopwords)


class DenseWordVectors:
    """Word-vector table; a sentence vector is the mean of the vectors of its
    in-vocabulary tokens, the zero vector if none are in vocabulary."""

    mode = DENSE

    def __init__(
        self, vectors: dict[str, np.ndarray], dim: int, *, drop_stopwords: bool = False
    ):
        self.vectors = vectors
        self.dim = dim
        self.drop_stopwords = drop_stopwords
        self._zero = dense_vector(np.zeros(dim))
        self._cache: dict[str, DenseVector] = {}

    def vector(self, text: str) -> DenseVector:
        cached = self._cache.get(text)
        if cached is None:
            rows = [
                self.vectors[t]
                for t in tokenize(text, drop_stopwords=self.drop_stopwords)
                if t in self.vectors
            ]
            cached = dense_vector(np.mean(rows, axis=0)) if rows else self._zero
            self._cache[text] = cached
        return cached


def load_dense(path: str | Path, *, drop_stopwords: bool = False) -> DenseWordVectors:
    """Load word vectors from text format: an optional "count dim" first line,
    then one token followed by its components per line, space-separated."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if lineno == 1 and len(fields) == 2 and all(_is_int(f) for f in fields):
                dim = int(fields[1])
                continue
            token, *rest = fields
            try:
                values = [float(x) for x in rest]
            except ValueError:
                raise FormatError(f"{path} line {lineno}: non-numeric vector component") from None
            if dim is None:
                dim = len(values)
            if dim <= 0 or len(values) != dim:
                raise FormatError(
                    f"{path} line {lineno}: expected {dim} components, found {len(values)}"
                )
            vectors[token] = np.asarray(values, dtype=float)
    if dim is None or not vectors:
        raise FormatError(f"{path}: no word vectors found")
    return DenseWordVectors(vectors, dim, drop_stopwords=drop_stopwords)


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


def qa_text(question: Question) -> str:
    """Question stem plus the correct answer's text; the Q/A side of every
    similarity comparison. Other answer choices are excluded."""
    parts = [p for p in (question.stem, answer_text(question)) if p]
    return " ".join(parts)


def fact_vectors(corpus: Corpus, provider) -> dict[str, SentenceVector]:
    """Vectorize every corpus fact once, keyed by uid."""
    return {uid: provider.vector(fact.text) for uid, fact in corpus.facts.items()}


def default_provider(corpus: Corpus) -> TfidfProvider:
    """TF-IDF provider built over all fact texts plus every question's
    question/answer text, the self-contained default backend."""
    texts = [fact.text for fact in corpus.facts.values()]
    for q in corpus.questions:
        if q.answer_key in q.choices:
            texts.append(qa_text(q))
        else:
            texts.append(q.stem)
    return TfidfProvider(texts)
