"""Pairwise concept interaction graphs: concepts, sentence sets, weighted edges."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cigmatch.keygraph import build_keygraph, detect_communities, textrank_keywords
from cigmatch.termsim import IdfTable, idf_table, tfidf_vector
from cigmatch.textprep import Document

DUMMY = frozenset()


class EmptyPairError(ValueError):
    pass


@dataclass
class CigVertex:
    concept: frozenset[str]
    sentences_a: list[int] = field(default_factory=list)
    sentences_b: list[int] = field(default_factory=list)

    @property
    def is_dummy(self) -> bool:
        return not self.concept

    @property
    def label(self) -> str:
        return " ".join(sorted(self.concept)) if self.concept else "<dummy>"


@dataclass
class ConceptInteractionGraph:
    vertices: list[CigVertex]
    adjacency: np.ndarray

    def __len__(self) -> int:
        return len(self.vertices)

    def swapped(self) -> "ConceptInteractionGraph":
        verts = [CigVertex(v.concept, list(v.sentences_b), list(v.sentences_a)) for v in self.vertices]
        return ConceptInteractionGraph(verts, self.adjacency.copy())

    def to_dict(self) -> dict:
        n = len(self.vertices)
        edges = [
            {"source": i, "target": j, "weight": float(self.adjacency[i, j])}
            for i in range(n)
            for j in range(i + 1, n)
            if self.adjacency[i, j] > 0
        ]
        return {
            "vertices": [
                {
                    "id": i,
                    "keywords": sorted(v.concept),
                    "dummy": v.is_dummy,
                    "sentences_a": v.sentences_a,
                    "sentences_b": v.sentences_b,
                }
                for i, v in enumerate(self.vertices)
            ],
            "edges": edges,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "ConceptInteractionGraph":
        verts = [
            CigVertex(frozenset(v["keywords"]), list(v["sentences_a"]), list(v["sentences_b"]))
            for v in d["vertices"]
        ]
        adj = np.zeros((len(verts), len(verts)))
        for e in d["edges"]:
            adj[e["source"], e["target"]] = adj[e["target"], e["source"]] = e["weight"]
        return cls(verts, adj)

    def to_dot(self, name: str = "cig") -> str:
        lines = [f"graph {name} {{", "  node [shape=box];"]
        for i, v in enumerate(self.vertices):
            label = f"{v.label}\\nA: {_fmt_ids(v.sentences_a)}\\nB: {_fmt_ids(v.sentences_b)}"
            lines.append(f'  v{i} [label="{_dot_escape(label)}"];')
        n = len(self.vertices)
        for i in range(n):
            for j in range(i + 1, n):
                w = self.adjacency[i, j]
                if w > 0:
                    lines.append(f'  v{i} -- v{j} [weight={w:.4f}, label="{w:.2f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fmt_ids(ids: Sequence[int]) -> str:
    return ",".join(str(i + 1) for i in ids) or "-"


def _dot_escape(s: str) -> str:
    return s.replace('"', '\\"')


def attach_sentences(
    sentences: Sequence[Sequence[str]], concepts: Sequence[frozenset[str]], idf: IdfTable | None = None
) -> tuple[list[list[int]], list[int]]:
    """Assign each sentence to its most TF-IDF-similar concept.

    Returns per-concept sentence index lists and the indices that matched no
    concept at all (the dummy vertex). Ties go to the lower concept index.
    """
    if not concepts:
        raise ValueError("need at least one concept")
    if idf is None:
        idf = idf_table(sentences)
    concept_vecs = [tfidf_vector(sorted(c), idf) for c in concepts]
    concept_norms = [math.sqrt(math.fsum(w * w for w in vec.values())) for vec in concept_vecs]
    assigned: list[list[int]] = [[] for _ in concepts]
    dummy: list[int] = []
    for si, sent in enumerate(sentences):
        svec = tfidf_vector(sent, idf)
        snorm = math.sqrt(math.fsum(w * w for w in svec.values()))
        best, best_sim = -1, 0.0
        for ci, cvec in enumerate(concept_vecs):
            shared = svec.keys() & cvec.keys()
            if not shared or snorm == 0.0:
                continue
            sim = math.fsum(svec[t] * cvec[t] for t in sorted(shared)) / (snorm * concept_norms[ci])
            if sim > best_sim:
                best, best_sim = ci, sim
        if best < 0:
            dummy.append(si)
        else:
            assigned[best].append(si)
    return assigned, dummy


def edge_weights(pseudo_docs: Sequence[Sequence[str]], idf: IdfTable) -> np.ndarray:
    """Symmetric TF-IDF cosine matrix between vertex pseudo-documents, zero diagonal."""
    vecs = [tfidf_vector(doc, idf) for doc in pseudo_docs]
    norms = [math.sqrt(math.fsum(w * w for w in v.values())) for v in vecs]
    n = len(vecs)
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            shared = vecs[i].keys() & vecs[j].keys()
            if not shared or norms[i] == 0.0 or norms[j] == 0.0:
                continue
            dot = math.fsum(vecs[i][t] * vecs[j][t] for t in sorted(shared))
            adj[i, j] = adj[j, i] = min(1.0, dot / (norms[i] * norms[j]))
    return adj


def vertex_pseudo_docs(cig: ConceptInteractionGraph, doc_a: Document, doc_b: Document) -> list[list[str]]:
    return [
        [t for i in v.sentences_a for t in doc_a.sentences[i]] + [t for i in v.sentences_b for t in doc_b.sentences[i]]
        for v in cig.vertices
    ]


def extract_keywords(doc: Document, top_k: int = 10, window: int = 3) -> Document:
    """Fill ``doc.keywords`` in place with TextRank keywords; returns ``doc``."""
    doc.keywords = textrank_keywords(doc, top_k=top_k, window=window)
    return doc


def build_pair_cig(
    doc_a: Document,
    doc_b: Document,
    use_communities: bool = False,
    min_size: int = 2,
    max_size: int = 6,
) -> ConceptInteractionGraph:
    """Build the merged graph for one document pair.

    Both documents must already carry keywords. Concepts come from one joint
    KeyGraph, so the two sides are aligned by construction. Only the pair's
    own sentences feed the IDF statistics, which keeps the result
    independent of argument order up to swapping the A/B sentence sets.
    """
    if not doc_a.sentences and not doc_b.sentences:
        raise EmptyPairError("empty pair")
    keywords = {k for k, _ in doc_a.keywords} | {k for k, _ in doc_b.keywords}
    all_sentences = list(doc_a.sentences) + list(doc_b.sentences)
    concepts: list[frozenset[str]] = []
    if keywords:
        kg = build_keygraph(keywords, all_sentences)
        if use_communities:
            concepts = detect_communities(kg, min_size, max_size)
        else:
            concepts = [frozenset([k]) for k in kg.vertices]

    idf = idf_table(all_sentences)
    if concepts:
        att_a, dummy_a = attach_sentences(doc_a.sentences, concepts, idf)
        att_b, dummy_b = attach_sentences(doc_b.sentences, concepts, idf)
    else:
        att_a, dummy_a = [], list(range(len(doc_a.sentences)))
        att_b, dummy_b = [], list(range(len(doc_b.sentences)))

    vertices = [CigVertex(c, a, b) for c, a, b in zip(concepts, att_a, att_b)]
    vertices.append(CigVertex(DUMMY, dummy_a, dummy_b))
    vertices = [v for v in vertices if v.sentences_a or v.sentences_b]

    cig = ConceptInteractionGraph(vertices, np.zeros((len(vertices), len(vertices))))
    cig.adjacency = edge_weights(vertex_pseudo_docs(cig, doc_a, doc_b), idf)
    return cig
