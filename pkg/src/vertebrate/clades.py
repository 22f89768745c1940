"""Ward-linkage agglomeration of topic centroids, dendrogram cuts, and clade sentiment propagation."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import NEGATIVE, POSITIVE
from .classify import LabeledDataset
from .topicmodel import TopicModel

logger = logging.getLogger(__name__)

EXCLUDED = "excluded"
UNASSIGNED = "unassigned"
SENTIMENTS = (POSITIVE, NEGATIVE, EXCLUDED)


class CladeError(ValueError):
    pass


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history. Leaves are nodes ``0..L-1``; the i-th merge creates node ``L + i``."""

    leaves: tuple[int, ...]
    merges: tuple[Merge, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "merges": [[m.left, m.right, m.distance, m.size] for m in self.merges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dendrogram":
        return cls(tuple(int(x) for x in d["leaves"]),
                   tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in d["merges"]))

    def leaf_order(self) -> list[int]:
        """Leaf node indices in left-to-right drawing order."""
        if not self.merges:
            return list(range(self.n_leaves))
        L = self.n_leaves

        def walk(node: int) -> list[int]:
            if node < L:
                return [node]
            m = self.merges[node - L]
            return walk(m.left) + walk(m.right)

        return walk(L + len(self.merges) - 1)


def ward_cluster(centroids, leaves: Sequence[int] | None = None) -> Dendrogram:
    """Agglomerate rows of ``centroids`` with Ward's linkage.

    Starts from squared Euclidean distances between points and updates with the
    Lance-Williams recurrence; heights stay on that squared scale. Equal
    distances resolve to the lowest ``(left, right)`` node pair.
    """
    X = np.asarray(centroids, dtype=float)
    if X.ndim != 2:
        raise CladeError("centroids must be a 2-D array (one row per topic)")
    L = len(X)
    if L < 2:
        raise CladeError(f"Ward clustering needs at least 2 leaves, got {L}")
    leaves = tuple(range(L)) if leaves is None else tuple(int(x) for x in leaves)
    if len(leaves) != L:
        raise CladeError("leaves and centroids differ in length")

    N = 2 * L - 1
    D = np.full((N, N), np.inf)
    diff = X[:, None, :] - X[None, :, :]
    D[:L, :L] = (diff ** 2).sum(axis=-1)
    size = np.zeros(N, dtype=int)
    size[:L] = 1
    active = list(range(L))
    merges = []
    for step in range(L - 1):
        sub = D[np.ix_(active, active)].copy()
        sub[np.tril_indices(len(active))] = np.inf
        a, b = np.unravel_index(np.argmin(sub), sub.shape)
        i, j = active[a], active[b]
        d_ij = D[i, j]
        new = L + step
        n_i, n_j = size[i], size[j]
        for k in active:
            if k in (i, j):
                continue
            n_k = size[k]
            d = ((n_i + n_k) * D[i, k] + (n_j + n_k) * D[j, k] - n_k * d_ij) / (n_i + n_j + n_k)
            D[new, k] = D[k, new] = d
        size[new] = n_i + n_j
        merges.append(Merge(int(i), int(j), float(d_ij), int(size[new])))
        active = [k for k in active if k not in (i, j)] + [new]
    return Dendrogram(leaves, tuple(merges))


@dataclass
class Clade:
    clade_id: int
    member_topic_ids: tuple[int, ...]
    sentiment: str = UNASSIGNED


@dataclass
class CladeCut:
    threshold: float | None
    n_clades: int | None
    clades: list[Clade]

    def clade_of(self) -> dict[int, int]:
        return {t: c.clade_id for c in self.clades for t in c.member_topic_ids}

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_clades": self.n_clades,
            "clades": [{"clade_id": c.clade_id, "topics": list(c.member_topic_ids), "sentiment": c.sentiment}
                       for c in self.clades],
        }


def cut_dendrogram(d: Dendrogram, threshold: float | None = None, n_clades: int | None = None) -> CladeCut:
    """Split the tree into clades, by height (merges below ``threshold``) or by count.

    Clade ids follow the smallest leaf position each clade contains.
    """
    if (threshold is None) == (n_clades is None):
        raise CladeError("give exactly one of threshold or n_clades")
    L = d.n_leaves
    if threshold is not None:
        if threshold <= 0:
            raise CladeError("cut threshold must be > 0")
        keep = [m.distance < threshold for m in d.merges]
    else:
        if n_clades < 1 or n_clades > L:
            raise CladeError(f"n_clades={n_clades} is outside [1, {L}] for {L} topics")
        # Remove the k-1 highest merges; ties go to the later merge.
        order = sorted(range(len(d.merges)), key=lambda i: (d.merges[i].distance, i))
        kept = set(order[:L - n_clades])
        keep = [i in kept for i in range(len(d.merges))]

    parent = list(range(2 * L - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, m in enumerate(d.merges):
        if keep[step]:
            node = L + step
            parent[find(m.left)] = node
            parent[find(m.right)] = node
    groups: dict[int, list[int]] = {}
    for leaf in range(L):
        groups.setdefault(find(leaf), []).append(leaf)
    members = sorted(groups.values(), key=min)
    clades = [Clade(i, tuple(sorted(d.leaves[x] for x in g))) for i, g in enumerate(members)]
    return CladeCut(threshold, n_clades, clades)


def default_threshold(d: Dendrogram, ratio: float = 0.7) -> float:
    return ratio * max(m.distance for m in d.merges)


@dataclass
class CladeLabels:
    clades: list[Clade]
    topic_sentiments: dict[int, str] = field(default_factory=dict)

    def counts(self) -> Counter:
        return Counter(self.topic_sentiments.values())

    def to_dict(self) -> dict:
        return {
            "clades": [{"clade_id": c.clade_id, "topics": list(c.member_topic_ids), "sentiment": c.sentiment}
                       for c in self.clades],
            "topic_sentiments": {str(k): v for k, v in sorted(self.topic_sentiments.items())},
        }


def assign_clade_sentiments(cut: CladeCut, assignment: Mapping[int, str],
                            exclusions: Iterable[int] = (), overrides: Mapping[int, str] | None = None,
                            strict: bool = False) -> CladeLabels:
    """Give every topic its clade's sentiment; excluded topics and overrides win."""
    known = {c.clade_id for c in cut.clades}
    unknown = sorted(set(assignment) - known)
    if unknown:
        raise CladeError(f"unknown clade id(s) in sentiment assignment: {unknown}")
    for cid, s in assignment.items():
        if s not in SENTIMENTS:
            raise CladeError(f"clade {cid}: sentiment must be one of {SENTIMENTS}, got {s!r}")
    missing = sorted(known - set(assignment))
    if missing and strict:
        raise CladeError(f"no sentiment assigned for clade(s): {missing}")
    if missing:
        logger.warning("clades without sentiment (left unassigned): %s", missing)

    clades = [Clade(c.clade_id, c.member_topic_ids, assignment.get(c.clade_id, UNASSIGNED)) for c in cut.clades]
    topic_sent = {t: c.sentiment for c in clades for t in c.member_topic_ids}
    for t in exclusions:
        topic_sent[int(t)] = EXCLUDED
    for t, s in (overrides or {}).items():
        if s not in SENTIMENTS:
            raise CladeError(f"topic {t}: override sentiment must be one of {SENTIMENTS}, got {s!r}")
        topic_sent[int(t)] = s
    return CladeLabels(clades, topic_sent)


def propagate_labels(labels: CladeLabels, model: TopicModel) -> LabeledDataset:
    """Label every comment of a positive or negative topic with that sentiment."""
    ids, out = [], []
    for topic in sorted(model.all_topics(), key=lambda t: t.topic_id):
        s = labels.topic_sentiments.get(topic.topic_id)
        if s in (POSITIVE, NEGATIVE):
            ids.extend(topic.member_ids)
            out.extend([s] * topic.count)
    return LabeledDataset(ids, out)


def read_sentiment_csv(path: str | Path, key: str) -> dict[int, str]:
    """Read ``<key>,sentiment`` rows (``clade_id`` or ``topic_id``)."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row[key])] = row["sentiment"].strip().lower()
    return out
