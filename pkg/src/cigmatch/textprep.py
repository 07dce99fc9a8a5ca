"""Sentence splitting, tokenization, vocabulary and frozen word embeddings."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

OOV_TOKEN = "<oov>"

_TERMINATORS = ".!?；。！？"
_SENTENCE_RE = re.compile(rf"[^{re.escape(_TERMINATORS)}]*(?:[{re.escape(_TERMINATORS)}]+|$)")
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_CJK_RE = re.compile(r"[㐀-䶿一-鿿豈-﫿]")

STOPWORDS_EN = frozenset(
    """
    a about above after again against all also am an and any are as at be because been
    before being below between both but by can could did do does doing down during each
    few for from further had has have having he her here hers herself him himself his how
    i if in into is it its itself just me more most my myself no nor not now of off on once
    only or other our ours ourselves out over own same she should so some such than that
    the their theirs them themselves then there these they this those through to too under
    until up very was we were what when where which while who whom why will with would you
    your yours yourself yourselves said says say one two new
    """.split()
)

STOPWORDS_ZH = frozenset(
    "的 了 在 是 我 有 和 就 不 人 都 一 一个 上 也 很 到 说 要 去 你 会 着 没有 看 好 自己 这 那 他 她 它 们 与 及 而 之 于 对 为 被 从 以 等 将 已 并 但 其 或".split()
)

STOPWORDS = STOPWORDS_EN | STOPWORDS_ZH


class EmbeddingFormatError(ValueError):
    pass


def split_sentences(text: str) -> list[str]:
    """Split on sentence-final punctuation, keeping the terminator attached."""
    out = []
    for match in _SENTENCE_RE.finditer(text):
        segment = match.group(0).strip()
        if segment:
            out.append(segment)
    return out


def _is_cjk(text: str) -> bool:
    return _CJK_RE.search(text) is not None


def tokenize(sentence: str) -> list[str]:
    """Lowercase word tokens with punctuation removed.

    Text without any whitespace that contains CJK characters is assumed to be
    unsegmented, so every CJK character becomes its own token.
    """
    lowered = sentence.lower()
    words = _WORD_RE.findall(lowered)
    if not words or any(ch.isspace() for ch in lowered.strip()) or not _is_cjk(lowered):
        return words
    tokens = []
    for word in words:
        run = ""
        for ch in word:
            if _CJK_RE.match(ch):
                if run:
                    tokens.append(run)
                    run = ""
                tokens.append(ch)
            else:
                run += ch
        if run:
            tokens.append(run)
    return tokens


@dataclass
class Document:
    id: str
    sentences: list[list[str]]
    keywords: list[tuple[str, float]] = field(default_factory=list)

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    def tokens(self) -> list[str]:
        return [tok for sent in self.sentences for tok in sent]


def make_document(text: str, doc_id: str = "") -> Document:
    sentences = []
    for raw in split_sentences(text):
        toks = tokenize(raw)
        if toks:
            sentences.append(toks)
    return Document(id=doc_id, sentences=sentences)


class Vocabulary:
    """Bijective token/index map with index 0 reserved for unknown tokens."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [OOV_TOKEN]
        self.stoi: dict[str, int] = {OOV_TOKEN: 0}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.stoi[token] = idx
            self.itos.append(token)
        return idx

    @classmethod
    def from_documents(cls, docs: Iterable[Document], min_count: int = 1) -> "Vocabulary":
        counts: dict[str, int] = {}
        for doc in docs:
            for tok in doc.tokens():
                counts[tok] = counts.get(tok, 0) + 1
        return cls(sorted(t for t, c in counts.items() if c >= min_count and t != OOV_TOKEN))

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, 0)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, 0) for t in tokens]


@dataclass
class EmbeddingTable:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.dim:
            raise ValueError(f"embedding matrix must be (n, {self.dim}), got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        self.matrix[0] = 0.0
        self.matrix.setflags(write=False)

    def lookup(self, ids: Sequence[int]) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return np.zeros((0, self.dim))
        ids = np.where((ids < 0) | (ids >= len(self.matrix)), 0, ids)
        return self.matrix[ids]


def load_embeddings(path: str | Path, vocab: Vocabulary) -> EmbeddingTable:
    """Read a word2vec-style text file, keeping rows for ``vocab`` tokens only."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise EmbeddingFormatError(f"line 1: expected '<count> <dim>' header, got {header.rstrip()!r}")
        count, dim = int(parts[0]), int(parts[1])
        if dim <= 0:
            raise EmbeddingFormatError("line 1: dimension must be positive")
        matrix = np.zeros((len(vocab), dim))
        n_rows = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise EmbeddingFormatError(
                    f"line {lineno}: expected token and {dim} values, got {len(fields) - 1} values"
                )
            try:
                values = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise EmbeddingFormatError(f"line {lineno}: {exc}") from None
            n_rows += 1
            idx = vocab.stoi.get(fields[0])
            if idx:
                matrix[idx] = values
        if n_rows != count:
            raise EmbeddingFormatError(f"line 1: header declares {count} vectors, file has {n_rows}")
    return EmbeddingTable(dim, matrix)


def write_embeddings(path: str | Path, tokens: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{len(tokens)} {matrix.shape[1]}\n")
        for tok, row in zip(tokens, matrix):
            fh.write(tok + " " + " ".join(repr(float(v)) for v in row) + "\n")


def random_embeddings(vocab: Vocabulary, dim: int = 64, seed: int = 0) -> EmbeddingTable:
    """Deterministic stand-in vectors for runs without a pre-trained file."""
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(vocab), dim))
    return EmbeddingTable(dim, matrix)
