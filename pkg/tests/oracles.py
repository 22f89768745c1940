"""Slow, obviously-correct reference implementations used by the tests."""

from collections import Counter
from itertools import combinations

import numpy as np


def brute_ward(X):
    """Greedy Ward merges recomputed from scratch at every step.

    The cost of merging clusters A and B is twice the increase in total
    within-cluster sum of squares, 2 * |A||B| / (|A|+|B|) * |mean_A - mean_B|^2,
    which equals the squared point distance for two singletons. Returns
    ``[(left_node, right_node, cost), ...]`` with the same node numbering as
    the production dendrogram: leaves first, then one new node per merge.
    """
    X = np.asarray(X, dtype=float)
    L = len(X)
    clusters = {i: [i] for i in range(L)}
    out = []
    for step in range(L - 1):
        best = None
        for a, b in combinations(sorted(clusters), 2):
            A, B = X[clusters[a]], X[clusters[b]]
            sse = lambda P: float(((P - P.mean(axis=0)) ** 2).sum())
            cost = 2.0 * (sse(np.vstack([A, B])) - sse(A) - sse(B))
            if best is None or cost < best[2] - 1e-12:
                best = (a, b, cost)
        a, b, cost = best
        clusters[L + step] = clusters.pop(a) + clusters.pop(b)
        out.append((a, b, cost))
    return out


def brute_dbscan(X, eps, min_members):
    """Textbook DBSCAN via explicit pairwise loops and union-find over core points.

    Clusters are numbered by their lowest-index core point; border points join
    the cluster of their lowest-index core neighbour.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    close = [[float(((X[i] - X[j]) ** 2).sum()) <= eps * eps for j in range(n)] for i in range(n)]
    core = [sum(close[i]) >= min_members for i in range(n)]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if core[i] and core[j] and close[i][j]:
                ri, rj = find(i), find(j)
                parent[max(ri, rj)] = min(ri, rj)
    labels = [-1] * n
    ids = {}
    for i in range(n):
        if core[i]:
            root = find(i)
            if root not in ids:
                ids[root] = len(ids)
            labels[i] = ids[root]
    for i in range(n):
        if not core[i]:
            for j in range(n):
                if core[j] and close[i][j]:
                    labels[i] = labels[j]
                    break
    return np.array(labels)


def brute_ngram_counts(corpus, n):
    counts = Counter()
    for tokens in corpus:
        for start in range(len(tokens)):
            window = tuple(tokens[start:start + n])
            if len(window) == n:
                counts[window] += 1
    return dict(counts)


def weighted_prf(counts):
    """Support-weighted precision, recall and F1 from a [truth][pred] table, written out longhand."""
    total = sum(sum(row) for row in counts)
    k = len(counts)
    p_sum = r_sum = f_sum = 0.0
    for c in range(k):
        tp = counts[c][c]
        support = sum(counts[c])
        predicted = sum(counts[t][c] for t in range(k))
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        p_sum += support * precision
        r_sum += support * recall
        f_sum += support * f1
    return p_sum / total, r_sum / total, f_sum / total
