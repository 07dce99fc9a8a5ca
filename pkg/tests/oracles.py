"""Independent reference implementations used as test oracles.

Nothing here imports the code under test; each function recomputes its
quantity from the textbook definition, by the most direct route available.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


def brute_force_betweenness(vertices, edges):
    """Edge betweenness by enumerating every shortest path of every vertex pair."""
    adj = {v: set() for v in vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)

    def bfs(src):
        dist = {src: 0}
        q = deque([src])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        return dist

    def paths(s, t, dist_s):
        # every walk from s to t of length dist(s, t) whose steps increase the distance by one
        if s == t:
            return [[s]]
        out = []
        stack = [[s]]
        while stack:
            p = stack.pop()
            last = p[-1]
            if last == t:
                out.append(p)
                continue
            for y in adj[last]:
                if dist_s.get(y) == len(p) and dist_s[y] <= dist_s[t]:
                    stack.append(p + [y])
        return out

    score = {tuple(sorted(e)): 0.0 for e in edges}
    for s, t in itertools.combinations(sorted(vertices), 2):
        dist_s = bfs(s)
        if t not in dist_s:
            continue
        ps = paths(s, t, dist_s)
        for p in ps:
            for u, v in zip(p, p[1:]):
                score[tuple(sorted((u, v)))] += 1.0 / len(ps)
    return score


def smoothed_idf(corpus):
    n = len(corpus)
    vocab = sorted({t for doc in corpus for t in doc})
    idf = {t: math.log((n + 1) / (sum(1 for d in corpus if t in d) + 1)) + 1 for t in vocab}
    unseen = math.log(n + 1) + 1
    avglen = sum(len(d) for d in corpus) / n
    return idf, unseen, avglen


def five_similarities(x, y, idf, unseen, avglen, k1=1.2, b=0.75):
    """tfidf_cos, tf_cos, bm25_cos, jaccard1 and ochiai with dense numpy vectors."""
    if not x or not y:
        return [0.0] * 5
    terms = sorted(set(x) | set(y))
    w = np.array([idf.get(t, unseen) for t in terms])
    tx = np.array([x.count(t) for t in terms], dtype=float)
    ty = np.array([y.count(t) for t in terms], dtype=float)

    def cos(u, v):
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    def bm25(tf, length):
        denom = tf + k1 * (1 - b + b * length / avglen)
        return np.where(tf > 0, w * tf * (k1 + 1) / denom, 0.0)

    sx, sy = set(x), set(y)
    return [
        cos(tx * w, ty * w),
        cos(tx, ty),
        cos(bm25(tx, len(x)), bm25(ty, len(y))),
        len(sx & sy) / len(sx | sy),
        len(sx & sy) / math.sqrt(len(sx) * len(sy)),
    ]


def numeric_grad(f, x: np.ndarray, h: float = 1e-5, coords=None) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to array ``x`` (mutated in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size) if coords is None else coords:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def dense_gcn(h, adj, w):
    """relu(D^-1/2 (A+I) D^-1/2 H W) written out with explicit diagonal matrices."""
    a = adj + np.eye(len(adj))
    d = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
    return np.maximum(d @ a @ d @ h @ w, 0.0)
