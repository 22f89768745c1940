"""Density-based topic discovery, class-based term ranking, shares and time series."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Comment
from .vectorspace import EmbeddingMatrix

OUTLIER_ID = -1


@dataclass
class Topic:
    topic_id: int
    member_ids: list[str]
    centroid: np.ndarray | None
    terms: list[tuple[str, float]] = field(default_factory=list)
    name: str | None = None

    @property
    def count(self) -> int:
        return len(self.member_ids)

    @property
    def is_outlier(self) -> bool:
        return self.topic_id == OUTLIER_ID

    def display_name(self) -> str:
        if self.name:
            return self.name
        if self.is_outlier:
            return "outlier"
        if self.terms:
            return ", ".join(t for t, _ in self.terms[:3])
        return f"topic {self.topic_id}"

    def to_dict(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "name": self.display_name(),
            "count": self.count,
            "member_ids": list(self.member_ids),
            "centroid": None if self.centroid is None else [float(x) for x in self.centroid],
            "terms": [[t, float(w)] for t, w in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Topic":
        centroid = None if d["centroid"] is None else np.array(d["centroid"], dtype=float)
        return cls(int(d["topic_id"]), list(d["member_ids"]), centroid,
                   [(t, float(w)) for t, w in d.get("terms", [])], d.get("name"))


@dataclass
class TopicModel:
    topics: list[Topic]
    outlier: Topic
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [t.topic_id for t in self.topics]
        if len(set(ids)) != len(ids) or OUTLIER_ID in ids:
            raise ValueError("topic ids must be unique and the outlier must be held separately")

    def all_topics(self) -> list[Topic]:
        return [*self.topics, self.outlier]

    def topic(self, topic_id: int) -> Topic:
        for t in self.all_topics():
            if t.topic_id == topic_id:
                return t
        raise KeyError(f"unknown topic_id {topic_id}")

    def assignments(self) -> dict[str, int]:
        return {cid: t.topic_id for t in self.all_topics() for cid in t.member_ids}

    @property
    def n_comments(self) -> int:
        return sum(t.count for t in self.all_topics())

    def apply_names(self, names: Mapping[int, str]) -> None:
        for t in self.all_topics():
            if t.topic_id in names:
                t.name = names[t.topic_id]

    def to_dict(self) -> dict:
        return {"params": self.params, "topics": [t.to_dict() for t in self.all_topics()]}

    @classmethod
    def from_dict(cls, d: dict) -> "TopicModel":
        topics = [Topic.from_dict(t) for t in d["topics"]]
        outlier = next(t for t in topics if t.topic_id == OUTLIER_ID)
        return cls([t for t in topics if t.topic_id != OUTLIER_ID], outlier, dict(d.get("params", {})))


# --------------------------------------------------------------------------- clustering


def neighborhoods(X: np.ndarray, eps: float, block: int = 256) -> list[np.ndarray]:
    """Indices within Euclidean distance ``eps`` of each row (the row itself included)."""
    X = np.asarray(X, dtype=float)
    eps2 = eps * eps
    out = []
    for start in range(0, len(X), block):
        d2 = ((X[start:start + block, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
        out.extend(np.flatnonzero(row <= eps2) for row in d2)
    return out


def dbscan(X: np.ndarray, eps: float, min_members: int) -> np.ndarray:
    """DBSCAN labels (``-1`` for noise).

    Clusters are numbered in order of their lowest-index core point. A border
    point joins the cluster of its lowest-index core neighbor.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_members < 1:
        raise ValueError("min_members must be >= 1")
    n = len(X)
    nbrs = neighborhoods(X, eps)
    core = np.array([len(nb) >= min_members for nb in nbrs], dtype=bool)
    labels = np.full(n, OUTLIER_ID, dtype=int)
    next_label = 0
    for i in range(n):
        if not core[i] or labels[i] != OUTLIER_ID:
            continue
        labels[i] = next_label
        stack = [i]
        while stack:
            p = stack.pop()
            for q in nbrs[p]:
                if core[q] and labels[q] == OUTLIER_ID:
                    labels[q] = next_label
                    stack.append(q)
        next_label += 1
    for i in np.flatnonzero(~core):
        core_nbrs = [q for q in nbrs[i] if core[q]]
        if core_nbrs:
            labels[i] = labels[min(core_nbrs)]
    return labels


def fit_topics(matrix: EmbeddingMatrix, eps: float, min_members: int,
               full: EmbeddingMatrix | None = None) -> TopicModel:
    """Cluster ``matrix`` rows into topics plus an outlier bucket.

    ``full`` holds the unreduced embeddings (same ids) used for centroids; it
    defaults to ``matrix`` itself.
    """
    if len(matrix) == 0:
        raise ValueError("cannot fit topics on an empty matrix")
    if min_members < 2:
        raise ValueError("min_members must be >= 2")
    full = matrix if full is None else full
    if full.ids != matrix.ids:
        full = full.subset(matrix.ids)
    labels = dbscan(matrix.rows, eps, min_members)
    ids = matrix.ids
    topics = []
    for label in range(labels.max() + 1 if len(labels) else 0):
        idx = np.flatnonzero(labels == label)
        topics.append(Topic(int(label), [ids[i] for i in idx], full.rows[idx].mean(axis=0)))
    noise = np.flatnonzero(labels == OUTLIER_ID)
    outlier = Topic(OUTLIER_ID, [ids[i] for i in noise],
                    full.rows[noise].mean(axis=0) if len(noise) else None)
    params = {"eps": eps, "min_members": min_members, "clustered_dim": matrix.dim,
              "embedding_dim": full.dim}
    return TopicModel(topics, outlier, params)


# --------------------------------------------------------------------------- terms


def class_tfidf(topic_tokens: Mapping[int, Sequence[str]]) -> dict[int, dict[str, float]]:
    """Class-based TF-IDF weights ``tf(t, c) * ln(1 + A / f(t))`` per topic.

    ``A`` is the mean token count over topics that have any tokens and ``f(t)``
    the total count of ``t`` over all topics.
    """
    tf = {c: Counter(toks) for c, toks in topic_tokens.items()}
    totals = [sum(cnt.values()) for cnt in tf.values() if cnt]
    if not totals:
        return {c: {} for c in tf}
    avg = sum(totals) / len(totals)
    freq: Counter = Counter()
    for cnt in tf.values():
        freq.update(cnt)
    return {c: {t: n * math.log(1.0 + avg / freq[t]) for t, n in cnt.items()} for c, cnt in tf.items()}


def topic_terms(model: TopicModel, tokens_by_id: Mapping[str, Sequence[str]], top_terms: int = 10) -> TopicModel:
    topic_tokens = {}
    for t in model.all_topics():
        toks: list[str] = []
        for cid in t.member_ids:
            toks.extend(tokens_by_id.get(cid, ()))
        topic_tokens[t.topic_id] = toks
    weights = class_tfidf(topic_tokens)
    for t in model.all_topics():
        ranked = sorted(weights[t.topic_id].items(), key=lambda kv: (-kv[1], kv[0]))
        t.terms = ranked[:top_terms]
    return model


# --------------------------------------------------------------------------- shares / time


def topic_shares(model: TopicModel, total: int | None = None) -> list[tuple[int, int, float]]:
    """``(topic_id, count, percentage)`` rows, largest first (ties by topic id)."""
    total = model.n_comments if total is None else total
    if total <= 0:
        raise ValueError("total must be positive")
    rows = [(t.topic_id, t.count, share_percentage(t.count, total)) for t in model.all_topics()]
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def share_percentage(count: int, total: int) -> float:
    if total <= 0:
        raise ValueError("total must be positive")
    return 100.0 * count / total


@dataclass(frozen=True)
class TemporalSeries:
    topic_id: int
    bins: tuple[tuple[date, int], ...]

    def to_dict(self) -> dict:
        return {"topic_id": self.topic_id, "bins": [[d.isoformat(), c] for d, c in self.bins]}


def _bin_start(d: date, bin: str) -> date:
    if bin == "day":
        return d
    if bin == "week":
        return d - timedelta(days=d.weekday())
    raise ValueError(f"bin must be 'day' or 'week', got {bin!r}")


def temporal_distribution(model: TopicModel, comments: Sequence[Comment], bin: str = "day",
                          topic_ids: Iterable[int] | None = None) -> list[TemporalSeries]:
    """Per-bin comment counts for each requested topic over the corpus date span.

    Weeks start on Monday. Empty bins are reported with count 0.
    """
    all_ids = {t.topic_id for t in model.all_topics()}
    wanted = sorted(all_ids if topic_ids is None else set(topic_ids))
    unknown = [t for t in wanted if t not in all_ids]
    if unknown:
        raise KeyError(f"unknown topic_id(s): {unknown}")
    if not comments:
        return [TemporalSeries(t, ()) for t in wanted]
    step = timedelta(days=1 if bin == "day" else 7)
    dates = {c.id: c.timestamp.date() for c in comments}
    first = _bin_start(min(dates.values()), bin)
    last = _bin_start(max(dates.values()), bin)
    starts = []
    d = first
    while d <= last:
        starts.append(d)
        d += step
    assignment = model.assignments()
    counts: dict[int, Counter] = defaultdict(Counter)
    for cid, day in dates.items():
        tid = assignment.get(cid)
        if tid is not None:
            counts[tid][_bin_start(day, bin)] += 1
    return [TemporalSeries(t, tuple((s, counts[t][s]) for s in starts)) for t in wanted]


def load_topic_names(path: str | Path) -> dict[int, str]:
    names = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            names[int(row["topic_id"])] = row["name"].strip()
    return names
