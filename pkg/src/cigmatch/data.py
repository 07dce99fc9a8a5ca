"""Labeled pair datasets: JSONL I/O, table import, splits, synthetic corpora."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DATA_DIR_ENV = "CIGMATCH_DATA_DIR"


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledPair:
    label: int
    doc_a: str
    doc_b: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not self.doc_a.strip() or not self.doc_b.strip():
            raise ValueError("both documents must be non-empty")


@dataclass
class DatasetSplit:
    train: list[LabeledPair]
    dev: list[LabeledPair]
    test: list[LabeledPair]

    def __getitem__(self, name: str) -> list[LabeledPair]:
        if name not in ("train", "dev", "test"):
            raise KeyError(f"unknown split {name!r}")
        return getattr(self, name)

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.dev), len(self.test)


def resolve_data_path(path: str | os.PathLike) -> Path:
    """Relative paths that do not exist locally are looked up under ``$CIGMATCH_DATA_DIR``."""
    p = Path(path)
    root = os.environ.get(DATA_DIR_ENV)
    if not p.is_absolute() and not p.exists() and root:
        return Path(root) / p
    return p


def load_jsonl(path: str | os.PathLike) -> list[LabeledPair]:
    pairs = []
    with open(resolve_data_path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"line {lineno}: expected a JSON object")
            missing = [k for k in ("label", "doc_a", "doc_b") if k not in obj]
            if missing:
                raise DatasetFormatError(f"line {lineno}: missing field(s) {', '.join(missing)}")
            try:
                label = int(obj["label"])
                if label != obj["label"] and str(label) != str(obj["label"]).strip():
                    raise ValueError
                pairs.append(LabeledPair(label, str(obj["doc_a"]), str(obj["doc_b"])))
            except (TypeError, ValueError) as exc:
                raise DatasetFormatError(f"line {lineno}: {exc or 'bad label'}") from None
    return pairs


def save_jsonl(pairs: Iterable[LabeledPair], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(json.dumps(asdict(p), ensure_ascii=False) + "\n")
            n += 1
    return n


def import_table(
    path: str | os.PathLike,
    label_col: str = "label",
    doc_a_col: str = "doc_a",
    doc_b_col: str = "doc_b",
    delimiter: str | None = None,
) -> list[LabeledPair]:
    """Read a CSV/TSV with a header row into pairs (TSV when the suffix is .tsv)."""
    path = resolve_data_path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() in (".tsv", ".tab") else ","
    csv.field_size_limit(1 << 30)
    pairs = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        cols = reader.fieldnames or []
        for col in (label_col, doc_a_col, doc_b_col):
            if col not in cols:
                raise DatasetFormatError(f"column {col!r} not found; header has {cols}")
        for lineno, row in enumerate(reader, start=2):
            try:
                pairs.append(LabeledPair(int(row[label_col]), row[doc_a_col], row[doc_b_col]))
            except (TypeError, ValueError) as exc:
                raise DatasetFormatError(f"row {lineno}: {exc}") from None
    return pairs


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(pairs: Sequence, seed: int = 0, fractions: tuple[float, float] = (0.6, 0.2)) -> DatasetSplit:
    """Shuffle deterministically and cut into train/dev/test (60/20/20 by default)."""
    n = len(pairs)
    if n < 5:
        raise ValueError(f"need at least 5 pairs to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = _round_half_up(fractions[0] * n)
    n_dev = _round_half_up(fractions[1] * n)
    items = [pairs[i] for i in order]
    return DatasetSplit(items[:n_train], items[n_train : n_train + n_dev], items[n_train + n_dev :])


# ---------------------------------------------------------------------------
# synthetic corpus

_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "ta", "vo", "si", "pe", "du", "fa", "go", "hi", "ju", "be", "zo"]


def _word(i: int) -> str:
    # Distinct pronounceable non-stopword tokens, e.g. 0 -> "kaka".
    parts = []
    i += len(_SYLLABLES)
    while i:
        i, r = divmod(i, len(_SYLLABLES))
        parts.append(_SYLLABLES[r])
    return "".join(reversed(parts))


def gen_synthetic(
    n_pairs: int,
    n_topics: int = 5,
    vocab_size: int = 2000,
    seed: int = 0,
    background_overlap: float = 0.5,
    min_sentences: int = 8,
    max_sentences: int = 15,
) -> list[LabeledPair]:
    """Generate balanced same-story / different-story article pairs.

    Every topic owns a disjoint keyword pool; the rest of the vocabulary is a
    shared, Zipf-weighted background. An article picks a few focus keywords
    of its topic, each with its own detail words, and writes sentences that
    mix one or two focus keywords, their details and background filler.

    A positive pair retells one story twice: same focus keywords and
    details, independently sampled sentences. A negative pair takes two
    topics and copies ``background_overlap`` of the first article's
    background words into the second, so the two read alike on the surface.
    """
    if n_topics < 2:
        raise ValueError("need at least two topics")
    if not 0.0 <= background_overlap <= 1.0:
        raise ValueError("background_overlap must be in [0, 1]")
    pool = vocab_size // (2 * n_topics)
    n_background = vocab_size - pool * n_topics
    if pool < 12 or n_background < 50:
        raise ValueError(f"vocab_size {vocab_size} too small for {n_topics} topic pools")

    rng = np.random.default_rng(seed)
    words = [_word(i) for i in range(vocab_size)]
    topics = [words[t * pool : (t + 1) * pool] for t in range(n_topics)]
    background = words[pool * n_topics :]
    bg_weights = 1.0 / np.arange(1, n_background + 1) ** 0.8
    bg_weights /= bg_weights.sum()

    def story(topic: int) -> dict[str, list[str]]:
        chosen = rng.choice(pool, size=rng.integers(4, 7), replace=False)
        focus = [topics[topic][i] for i in chosen]
        rest = [w for w in topics[topic] if w not in focus]
        return {k: list(rng.choice(rest, size=3, replace=False)) for k in focus}

    def write(st: dict[str, list[str]], bg_source: list[str] | None = None) -> tuple[str, list[str]]:
        focus = list(st)
        sentences, used_bg = [], []
        for _ in range(rng.integers(min_sentences, max_sentences + 1)):
            keys = list(rng.choice(focus, size=rng.integers(1, 3), replace=False))
            toks = list(keys)
            for k in keys:
                toks += list(rng.choice(st[k], size=rng.integers(1, 3), replace=False))
            n_bg = int(rng.integers(3, 7))
            if bg_source:
                n_copy = int(rng.binomial(n_bg, background_overlap))
                bg = list(rng.choice(bg_source, size=n_copy)) + list(rng.choice(background, size=n_bg - n_copy, p=bg_weights))
            else:
                bg = list(rng.choice(background, size=n_bg, p=bg_weights))
            used_bg += bg
            toks += bg
            rng.shuffle(toks)
            sentences.append(" ".join(toks).capitalize() + ".")
        return " ".join(sentences), used_bg

    pairs = []
    for i in range(n_pairs):
        label = 1 if i % 2 == 0 else 0
        if label:
            t = int(rng.integers(n_topics))
            st = story(t)
            doc_a, _ = write(st)
            doc_b, _ = write(st)
        else:
            ta, tb = rng.choice(n_topics, size=2, replace=False)
            doc_a, bg_a = write(story(int(ta)))
            doc_b, _ = write(story(int(tb)), bg_source=bg_a)
        if rng.random() < 0.5:
            doc_a, doc_b = doc_b, doc_a
        pairs.append(LabeledPair(label, doc_a, doc_b))
    order = rng.permutation(n_pairs)
    return [pairs[i] for i in order]
