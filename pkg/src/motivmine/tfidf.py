"""Sparse TFIDF vectors over a training-fitted vocabulary.

Weights are raw term frequency times ln(N/df), unsmoothed, so a term
present in every fit document weighs zero; each document vector is then
L2-normalized.  Test documents reuse the training vocabulary, N and df.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .textprep import TokenizedDoc

_FORMAT_VERSION = "motivmine-vocab v1"


@dataclass(frozen=True)
class Vocabulary:
    """Lexicographically ordered terms with their document frequencies."""

    terms: tuple[str, ...]
    doc_freqs: tuple[int, ...]
    n_docs: int
    min_df: int

    def __post_init__(self) -> None:
        if len(self.terms) != len(self.doc_freqs):
            raise DataError("terms and doc_freqs differ in length")
        if any(not 1 <= df <= self.n_docs for df in self.doc_freqs):
            raise DataError("document frequencies must lie in [1, n_docs]")
        if list(self.terms) != sorted(self.terms):
            raise DataError("vocabulary terms must be sorted")

    @cached_property
    def term_to_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_index

    def index(self, term: str) -> int:
        return self.term_to_index[term]

    def df(self, term: str) -> int:
        return self.doc_freqs[self.term_to_index[term]]

    def idf(self, term: str) -> float:
        return math.log(self.n_docs / self.df(term))


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs; values are finite and nonzero."""

    dimension: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise DataError("indices and values differ in length")
        if len(self.indices) > 0:
            if not np.all(np.diff(self.indices) > 0):
                raise DataError("indices must be strictly increasing")
            if self.indices[0] < 0 or self.indices[-1] >= self.dimension:
                raise DataError("index out of range")
            if not np.all(np.isfinite(self.values)) or np.any(self.values == 0.0):
                raise DataError("values must be finite and nonzero")

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        dense[self.indices] = self.values
        return dense


def build_vocabulary(docs: Sequence[TokenizedDoc], min_df: int = 2) -> Vocabulary:
    """Collect terms appearing in at least ``min_df`` documents.

    df counts documents, not occurrences.
    """
    if not docs:
        raise DataError("cannot fit a vocabulary on an empty document list")
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc.tokens))
    kept = sorted(t for t, c in df.items() if c >= min_df)
    if not kept:
        raise DataError(f"no term appears in at least {min_df} documents; vocabulary is empty")
    return Vocabulary(
        terms=tuple(kept),
        doc_freqs=tuple(df[t] for t in kept),
        n_docs=len(docs),
        min_df=min_df,
    )


def transform(doc: TokenizedDoc, vocab: Vocabulary) -> SparseVector:
    """TFIDF-weight one document against a fitted vocabulary.

    Out-of-vocabulary terms are ignored; zero weights (idf 0) are not
    stored; the result is L2-normalized unless it has no entries.
    """
    counts = Counter(doc.tokens)
    pairs = []
    for term, tf in counts.items():
        i = vocab.term_to_index.get(term)
        if i is None:
            continue
        weight = tf * math.log(vocab.n_docs / vocab.doc_freqs[i])
        if weight != 0.0:
            pairs.append((i, weight))
    pairs.sort()
    indices = np.array([i for i, _ in pairs], dtype=np.int32)
    values = np.array([v for _, v in pairs], dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm > 0.0:
        values = values / norm
    return SparseVector(dimension=len(vocab), indices=indices, values=values)


def transform_many(docs: Iterable[TokenizedDoc], vocab: Vocabulary) -> list[SparseVector]:
    return [transform(doc, vocab) for doc in docs]


def vectors_to_csr(vectors: Sequence[SparseVector], dimension: int | None = None) -> "sp.csr_matrix":
    """Stack sparse vectors into one CSR matrix, row per document."""
    import scipy.sparse as sp

    if dimension is None:
        if not vectors:
            raise ValueError("dimension is required for an empty vector list")
        dimension = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, vec in enumerate(vectors):
        if vec.dimension != dimension:
            raise DataError("sparse vectors differ in dimension")
        indptr[i + 1] = indptr[i] + len(vec.indices)
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, dtype=np.int32)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dimension))


def vocabulary_text(vocab: Vocabulary) -> str:
    """Canonical serialized form: header carrying N and min_df, then
    ``term<TAB>index<TAB>df`` lines."""
    lines = [_FORMAT_VERSION, f"N={vocab.n_docs} min_df={vocab.min_df}"]
    lines += [f"{t}\t{i}\t{vocab.doc_freqs[i]}" for i, t in enumerate(vocab.terms)]
    return "\n".join(lines) + "\n"


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_text(vocabulary_text(vocab), encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or lines[0] != _FORMAT_VERSION:
        raise DataError(f"{path}: not a {_FORMAT_VERSION} file")
    header = dict(part.split("=", 1) for part in lines[1].split())
    try:
        n_docs, min_df = int(header["N"]), int(header["min_df"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed vocabulary header: {lines[1]!r}") from exc
    terms, dfs = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        try:
            term, index, df = line.split("\t")
            index, df = int(index), int(df)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed vocabulary entry") from exc
        if index != len(terms):
            raise DataError(f"{path}:{lineno}: indices must be contiguous from 0")
        terms.append(term)
        dfs.append(df)
    return Vocabulary(terms=tuple(terms), doc_freqs=tuple(dfs), n_docs=n_docs, min_df=min_df)
