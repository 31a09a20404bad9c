"""Bag-of-words tf-idf features in CSR layout."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class Vocabulary:
    tokens: list[str]
    idf: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.idf = np.asarray(self.idf, dtype=np.float64)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens) or len(self.idf) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique and match idf length")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


def build_vocab(train_texts: Sequence[str], min_df: int = 2) -> Vocabulary:
    """Tokens with document frequency >= min_df, sorted; smoothed idf weights."""
    if not train_texts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    df: Counter = Counter()
    for text in train_texts:
        df.update(set(tokenize(text)))
    tokens = sorted(t for t, n in df.items() if n >= min_df)
    n_docs = len(train_texts)
    idf = np.array([math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in tokens], dtype=np.float64)
    return Vocabulary(tokens, idf)


@dataclass
class FeatureMatrix:
    """CSR rows; each row is one document's feature vector."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_features: int

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.indptr) - 1

    def rows(self, idx) -> FeatureMatrix:
        idx = np.asarray(idx, dtype=np.int64)
        starts, stops = self.indptr[idx], self.indptr[idx + 1]
        lengths = stops - starts
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        take = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)]) if len(idx) else np.empty(0, np.int64)
        return FeatureMatrix(indptr, self.indices[take], self.data[take], self.n_features)

    def with_data(self, data: np.ndarray) -> FeatureMatrix:
        return FeatureMatrix(self.indptr, self.indices, data, self.n_features)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((len(self), self.n_features))
        for i in range(len(self)):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> FeatureMatrix:
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        indptr, indices, data = [0], [], []
        for row in dense:
            nz = np.flatnonzero(row)
            indices.extend(nz)
            data.extend(row[nz])
            indptr.append(len(indices))
        return cls(np.array(indptr), np.array(indices, dtype=np.int32), np.array(data), dense.shape[1])


def featurize(vocab: Vocabulary, texts: Sequence[str]) -> FeatureMatrix:
    """Term counts times idf, each row L2-normalized; unknown tokens dropped."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        counts = Counter(vocab.index[t] for t in tokenize(text) if t in vocab.index)
        cols = sorted(counts)
        vals = np.array([counts[c] * vocab.idf[c] for c in cols], dtype=np.float64)
        norm = float(np.sqrt(vals @ vals)) if len(vals) else 0.0
        if norm > 0:
            vals /= norm
        indices.extend(cols)
        data.extend(vals.tolist())
        indptr.append(len(indices))
    return FeatureMatrix(np.array(indptr), np.array(indices, dtype=np.int32), np.array(data), vocab.size)
