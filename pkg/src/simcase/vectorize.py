"""TF-IDF document embeddings: raw term counts times ``ln(N / df)``."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[list(self.indices)] = self.weights
        return out

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.weights))


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "term_to_index", {t: i for i, t in enumerate(self.terms)})
        if len(self.term_to_index) != len(self.terms):
            raise ValueError("vocabulary terms must be distinct")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_index

    def index(self, term: str) -> int:
        return self.term_to_index[term]


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: Vocabulary
    doc_count: int
    doc_freq: tuple[int, ...]
    tf_mode: str = "count"
    l2_normalize: bool = False

    def __post_init__(self):
        if self.tf_mode not in ("count", "relative"):
            raise ValueError(f"unknown tf_mode {self.tf_mode!r}")
        if len(self.doc_freq) != len(self.vocabulary):
            raise ValueError("doc_freq length differs from vocabulary size")
        if any(not 1 <= f <= self.doc_count for f in self.doc_freq):
            raise ValueError("every document frequency must lie in [1, doc_count]")
        idf = np.log(self.doc_count / np.asarray(self.doc_freq, dtype=float)) if self.doc_freq else np.zeros(0)
        object.__setattr__(self, "idf", idf)

    @property
    def n_terms(self) -> int:
        return len(self.vocabulary)

    def _term_weights(self, tokens: Sequence[str]) -> tuple[list[int], list[float]]:
        counts = Counter(t for t in tokens if t in self.vocabulary)
        idx = sorted(self.vocabulary.index(t) for t in counts)
        denom = len(tokens) if self.tf_mode == "relative" else 1
        terms = self.vocabulary.terms
        w = [counts[terms[i]] / denom * self.idf[i] for i in idx]
        keep = [(i, x) for i, x in zip(idx, w) if x != 0.0]
        if self.l2_normalize and keep:
            norm = math.sqrt(sum(x * x for _, x in keep))
            keep = [(i, x / norm) for i, x in keep]
        return [i for i, _ in keep], [float(x) for _, x in keep]

    def transform(self, tokens: Sequence[str]) -> SparseVector:
        idx, w = self._term_weights(tokens)
        return SparseVector(tuple(idx), tuple(w))

    def transform_many(self, streams: Iterable[Sequence[str]]) -> sp.csr_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for tokens in streams:
            idx, w = self._term_weights(tokens)
            indices.extend(idx)
            data.extend(w)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
            shape=(len(indptr) - 1, self.n_terms),
        )

    def to_dict(self) -> dict:
        return {
            "format": "simcase.tfidf",
            "version": FORMAT_VERSION,
            "tf_mode": self.tf_mode,
            "l2_normalize": self.l2_normalize,
            "doc_count": self.doc_count,
            "terms": list(self.vocabulary.terms),
            "doc_freq": list(self.doc_freq),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TfidfModel":
        if d.get("format") != "simcase.tfidf" or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a simcase TF-IDF model file (or unsupported version)")
        return cls(Vocabulary(tuple(d["terms"])), int(d["doc_count"]), tuple(int(x) for x in d["doc_freq"]),
                   d.get("tf_mode", "count"), bool(d.get("l2_normalize", False)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_tfidf(streams: Iterable[Sequence[str]], tf_mode: str = "count", l2_normalize: bool = False) -> TfidfModel:
    """Fit vocabulary and per-term document frequencies on token streams.

    Terms are indexed in sorted order so the model is independent of
    document order.
    """
    df: Counter[str] = Counter()
    n = 0
    for tokens in streams:
        n += 1
        df.update(set(tokens))
    if n == 0:
        raise ValueError("cannot fit TF-IDF on an empty collection")
    if not df:
        raise ValueError("empty vocabulary: every token stream is empty")
    terms = tuple(sorted(df))
    return TfidfModel(Vocabulary(terms), n, tuple(df[t] for t in terms), tf_mode, l2_normalize)
