"""Term-based similarity metrics shared by the graph model and the baselines."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Mapping
from dataclasses import astuple, dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

FEATURE_NAMES = ("tfidf_cos", "tf_cos", "bm25_cos", "jaccard1", "ochiai")


class IdfTable(Mapping):
    """Smoothed inverse document frequencies, ``ln((N+1)/(df+1)) + 1``.

    Unseen tokens get the df=0 value, so every weight is strictly positive.
    Also remembers the average document length used by BM25.
    """

    def __init__(self, df: Mapping[str, int], n_docs: int, avglen: float):
        if n_docs <= 0:
            raise ValueError("IDF needs at least one document")
        self.df = dict(df)
        self.n_docs = int(n_docs)
        self.avglen = float(avglen)
        self.unseen = math.log(self.n_docs + 1) + 1.0
        self._idf = {t: math.log((self.n_docs + 1) / (c + 1)) + 1.0 for t, c in self.df.items()}

    def __getitem__(self, token: str) -> float:
        return self._idf.get(token, self.unseen)

    def __iter__(self) -> Iterator[str]:
        return iter(self._idf)

    def __len__(self) -> int:
        return len(self._idf)

    def __contains__(self, token) -> bool:
        return token in self._idf

    def to_dict(self) -> dict:
        return {"n_docs": self.n_docs, "avglen": self.avglen, "df": self.df}

    @classmethod
    def from_dict(cls, d: Mapping) -> "IdfTable":
        return cls(d["df"], d["n_docs"], d["avglen"])


def idf_table(corpus: Iterable[Sequence[str]]) -> IdfTable:
    df: Counter[str] = Counter()
    n_docs = 0
    total_len = 0
    for doc in corpus:
        n_docs += 1
        total_len += len(doc)
        df.update(set(doc))
    if n_docs == 0:
        raise ValueError("IDF needs at least one document")
    return IdfTable(df, n_docs, total_len / n_docs)


@dataclass(frozen=True)
class SimilarityFeatures:
    tfidf_cos: float = 0.0
    tf_cos: float = 0.0
    bm25_cos: float = 0.0
    jaccard1: float = 0.0
    ochiai: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def _cosine(wx: Mapping[str, float], wy: Mapping[str, float]) -> float:
    shared = sorted(wx.keys() & wy.keys())
    if not shared:
        return 0.0
    dot = math.fsum(wx[t] * wy[t] for t in shared)
    nx = math.sqrt(math.fsum(w * w for w in wx.values()))
    ny = math.sqrt(math.fsum(w * w for w in wy.values()))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    # Rounding can push identical vectors a hair past 1.
    return min(1.0, max(0.0, dot / (nx * ny)))


def tfidf_vector(tokens: Sequence[str], idf: Mapping[str, float]) -> dict[str, float]:
    return {t: c * idf[t] for t, c in Counter(tokens).items()}


def bm25_vector(tokens: Sequence[str], idf: IdfTable, k1: float = 1.2, b: float = 0.75) -> dict[str, float]:
    tf = Counter(tokens)
    avglen = idf.avglen if idf.avglen > 0 else 1.0
    norm = k1 * (1.0 - b + b * len(tokens) / avglen)
    return {t: idf[t] * c * (k1 + 1.0) / (c + norm) for t, c in tf.items()}


def cosine_tfidf(x: Sequence[str], y: Sequence[str], idf: Mapping[str, float]) -> float:
    return _cosine(tfidf_vector(x, idf), tfidf_vector(y, idf))


def similarity_features(
    x: Sequence[str], y: Sequence[str], idf: IdfTable, k1: float = 1.2, b: float = 0.75
) -> SimilarityFeatures:
    """The five term similarities between two token multisets, all in [0, 1]."""
    if not x or not y:
        return SimilarityFeatures()
    if Counter(x) == Counter(y):
        return SimilarityFeatures(1.0, 1.0, 1.0, 1.0, 1.0)
    sx, sy = set(x), set(y)
    common = len(sx & sy)
    return SimilarityFeatures(
        tfidf_cos=_cosine(tfidf_vector(x, idf), tfidf_vector(y, idf)),
        tf_cos=_cosine(Counter(x), Counter(y)),
        bm25_cos=_cosine(bm25_vector(x, idf, k1, b), bm25_vector(y, idf, k1, b)),
        jaccard1=common / len(sx | sy),
        ochiai=common / math.sqrt(len(sx) * len(sy)),
    )


def vertex_term_features(vertex, doc_a, doc_b, idf: IdfTable) -> SimilarityFeatures:
    """Compare the doc-A and doc-B sentences attached to one graph vertex."""
    side_a = [tok for i in vertex.sentences_a for tok in doc_a.sentences[i]]
    side_b = [tok for i in vertex.sentences_b for tok in doc_b.sentences[i]]
    return similarity_features(side_a, side_b, idf)
