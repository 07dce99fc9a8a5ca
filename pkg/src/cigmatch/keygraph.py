"""TextRank keywords, the keyword co-occurrence graph and its communities."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from cigmatch.textprep import STOPWORDS, Document

Edge = tuple[str, str]


def _edge(u: str, v: str) -> Edge:
    return (u, v) if u < v else (v, u)


def textrank_keywords(
    doc: Document,
    top_k: int = 10,
    window: int = 3,
    damping: float = 0.85,
    epsilon: float = 1e-6,
    max_iter: int = 100,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[tuple[str, float]]:
    """Rank candidate words by PageRank over a sliding-window co-occurrence graph.

    Tokens closer than ``window`` positions inside one sentence are linked.
    Scores are updated synchronously, so symmetric words keep identical
    scores. Ties in the final ranking go to the lexicographically smaller
    token.
    """
    neighbors: dict[str, set[str]] = {}
    for sent in doc.sentences:
        words = [t for t in sent if t not in stopwords]
        for i, w in enumerate(words):
            neighbors.setdefault(w, set())
            for j in range(i + 1, min(i + window, len(words))):
                u = words[j]
                if u != w:
                    neighbors[w].add(u)
                    neighbors.setdefault(u, set()).add(w)
    if not neighbors:
        return []

    nodes = sorted(neighbors)
    adj = {v: sorted(neighbors[v]) for v in nodes}
    degree = {v: len(adj[v]) for v in nodes}
    score = dict.fromkeys(nodes, 1.0)
    for _ in range(max_iter):
        new = {v: (1.0 - damping) + damping * sum(score[u] / degree[u] for u in adj[v]) for v in nodes}
        delta = max(abs(new[v] - score[v]) for v in nodes)
        score = new
        if delta < epsilon:
            break
    ranked = sorted(nodes, key=lambda v: (-score[v], v))
    return [(v, score[v]) for v in ranked[:top_k]]


@dataclass
class KeyGraph:
    vertices: list[str] = field(default_factory=list)
    edges: dict[Edge, int] = field(default_factory=dict)

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def __len__(self) -> int:
        return len(self.vertices)


def build_keygraph(keywords: Iterable[str], sentences: Sequence[Sequence[str]]) -> KeyGraph:
    """Link two keywords with the number of sentences containing both."""
    keyset = set(keywords)
    present: set[str] = set()
    counts: dict[Edge, int] = {}
    for sent in sentences:
        found = sorted(keyset.intersection(sent))
        present.update(found)
        for u, v in combinations(found, 2):
            counts[(u, v)] = counts.get((u, v), 0) + 1
    return KeyGraph(vertices=sorted(present), edges=dict(sorted(counts.items())))


def _betweenness(vertices: Sequence[str], adj: dict[str, set[str]]) -> dict[Edge, float]:
    # Brandes accumulation, BFS from every source; each unordered pair is seen twice.
    scores: dict[Edge, float] = {}
    for u in vertices:
        for v in adj[u]:
            if u < v:
                scores[(u, v)] = 0.0
    for s in vertices:
        order = []
        preds: dict[str, list[str]] = {v: [] for v in vertices}
        sigma = dict.fromkeys(vertices, 0.0)
        dist = dict.fromkeys(vertices, -1)
        sigma[s] = 1.0
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in sorted(adj[v]):
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(vertices, 0.0)
        for w in reversed(order):
            for v in preds[w]:
                credit = sigma[v] / sigma[w] * (1.0 + delta[w])
                scores[_edge(v, w)] += credit
                delta[v] += credit
    return {e: c / 2.0 for e, c in scores.items()}


def edge_betweenness(g: KeyGraph) -> dict[Edge, float]:
    """Shortest-path edge betweenness over unordered vertex pairs (hop count)."""
    return _betweenness(g.vertices, g.adjacency())


def _components(vertices: Iterable[str], adj: dict[str, set[str]]) -> list[list[str]]:
    seen: set[str] = set()
    comps = []
    for start in sorted(vertices):
        if start in seen:
            continue
        seen.add(start)
        comp = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def detect_communities(g: KeyGraph, min_size: int = 2, max_size: int = 6) -> list[frozenset[str]]:
    """Split the graph by repeatedly cutting its highest-betweenness edge.

    Components inside ``[min_size, max_size]`` become concepts; larger ones
    keep splitting; members of smaller ones each become a singleton concept.
    The result is a partition of the graph's vertices.
    """
    if min_size < 1 or max_size < min_size:
        raise ValueError("need 1 <= min_size <= max_size")
    work = g.adjacency()
    concepts: list[frozenset[str]] = []
    pending = deque(_components(g.vertices, work))
    while pending:
        comp = pending.popleft()
        if len(comp) < min_size:
            concepts.extend(frozenset([v]) for v in comp)
            continue
        if len(comp) <= max_size:
            concepts.append(frozenset(comp))
            continue
        parts = [comp]
        while len(parts) == 1:
            scores = _betweenness(comp, work)
            top = max(scores.values())
            u, v = min(e for e, s in scores.items() if s >= top - 1e-9)
            work[u].discard(v)
            work[v].discard(u)
            parts = _components(comp, work)
        pending.extend(parts)
    return sorted(concepts, key=lambda c: sorted(c))
