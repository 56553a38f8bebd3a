"""Vocabulary fitting and the TF-IDF transformation over token documents."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .textprep import Document

FEATURES_FORMAT_VERSION = 1


class SparseVector:
    """Immutable (index, value) pairs with strictly increasing indices.

    Explicit zeros are dropped at construction time; an all-zero input
    therefore yields an empty vector.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices: Sequence[int], values: Sequence[float]):
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D of equal length")
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        keep = val != 0.0
        self.indices = idx[keep]
        self.values = val[keep]

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls([], [])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return self.nnz

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )

    def __repr__(self) -> str:
        entries = ", ".join(f"{i}:{v:g}" for i, v in self)
        return f"SparseVector({{{entries}}})"


@dataclass
class Vocabulary:
    """Fitted term inventory with per-term document frequencies."""

    term_to_index: dict[str, int]
    ngram_range: tuple[int, int]
    n_docs: int
    doc_freq: np.ndarray

    def __post_init__(self) -> None:
        size = len(self.term_to_index)
        if sorted(self.term_to_index.values()) != list(range(size)):
            raise ValueError("term indices must be dense in [0, size)")
        if self.doc_freq.shape != (size,):
            raise ValueError("doc_freq length must match vocabulary size")
        if np.any(self.doc_freq <= 0) or np.any(self.doc_freq > self.n_docs):
            raise ValueError("document frequencies must lie in [1, n_docs]")

    def __len__(self) -> int:
        return len(self.term_to_index)

    @property
    def terms(self) -> list[str]:
        ordered = sorted(self.term_to_index.items(), key=lambda kv: kv[1])
        return [term for term, _ in ordered]


@dataclass
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray
    l2_normalize: bool = True

    def __post_init__(self) -> None:
        if self.idf.shape != (len(self.vocabulary),):
            raise ValueError("idf length must match vocabulary size")
        if np.any(self.idf <= 0):
            raise ValueError("idf weights must be positive")

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)


def extract_ngrams(tokens: Sequence[str], ngram_range: tuple[int, int]) -> list[str]:
    """All contiguous n-grams for n in the given range, joined by spaces."""
    lo, hi = ngram_range
    grams: list[str] = []
    for n in range(lo, hi + 1):
        grams.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return grams


def fit_vocabulary(
    train_docs: Sequence[Document], ngram_range: tuple[int, int] = (1, 1)
) -> Vocabulary:
    """Collect every training n-gram and count the documents containing it."""
    if not train_docs:
        raise ValueError("empty training corpus")
    lo, hi = ngram_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid ngram_range {ngram_range!r}")
    df: dict[str, int] = {}
    for doc in train_docs:
        for term in set(extract_ngrams(doc.tokens, ngram_range)):
            df[term] = df.get(term, 0) + 1
    terms = sorted(df)
    term_to_index = {term: i for i, term in enumerate(terms)}
    doc_freq = np.array([df[term] for term in terms], dtype=np.int64)
    return Vocabulary(term_to_index, (lo, hi), len(train_docs), doc_freq)


def fit_tfidf(
    train_docs: Sequence[Document],
    ngram_range: tuple[int, int] = (1, 1),
    l2_normalize: bool = True,
) -> TfidfModel:
    """Fit the vocabulary and the smoothed idf weights on training documents.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, which is strictly positive and
    strictly decreasing in df.
    """
    vocab = fit_vocabulary(train_docs, ngram_range)
    idf = np.log((1.0 + vocab.n_docs) / (1.0 + vocab.doc_freq)) + 1.0
    return TfidfModel(vocab, idf, l2_normalize)


def transform(doc: Document, model: TfidfModel) -> SparseVector:
    """TF-IDF vector of one document; out-of-vocabulary n-grams are ignored."""
    counts: dict[int, int] = {}
    lookup = model.vocabulary.term_to_index
    for term in extract_ngrams(doc.tokens, model.vocabulary.ngram_range):
        j = lookup.get(term)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    if not counts:
        return SparseVector.empty()
    indices = sorted(counts)
    values = np.array([counts[j] for j in indices], dtype=np.float64)
    values *= model.idf[indices]
    if model.l2_normalize:
        norm = math.sqrt(float(np.dot(values, values)))
        if norm > 0.0:
            values /= norm
    return SparseVector(indices, values)


def transform_many(docs: Iterable[Document], model: TfidfModel) -> sp.csr_matrix:
    """Stack per-document TF-IDF vectors into one CSR matrix."""
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for doc in docs:
        vec = transform(doc, model)
        indices.extend(vec.indices.tolist())
        data.extend(vec.values.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(indptr) - 1, model.n_features),
    )


def save_tfidf(model: TfidfModel, path: str | Path) -> None:
    payload = {
        "format_version": FEATURES_FORMAT_VERSION,
        "terms": model.vocabulary.terms,
        "doc_freq": model.vocabulary.doc_freq.tolist(),
        "n_docs": model.vocabulary.n_docs,
        "ngram_range": list(model.vocabulary.ngram_range),
        "l2_normalize": model.l2_normalize,
        "idf": model.idf.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_tfidf(path: str | Path) -> TfidfModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != FEATURES_FORMAT_VERSION:
        raise ValueError(f"unsupported feature model version {version!r}")
    terms = payload["terms"]
    vocab = Vocabulary(
        {term: i for i, term in enumerate(terms)},
        tuple(payload["ngram_range"]),
        payload["n_docs"],
        np.asarray(payload["doc_freq"], dtype=np.int64),
    )
    return TfidfModel(
        vocab, np.asarray(payload["idf"], dtype=np.float64), payload["l2_normalize"]
    )
