"""Gradient-boosted regression trees on logistic loss, grown level-wise or leaf-wise."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .classify import LabeledDataset, TrainedModel, _xy

P_CLIP = 1e-6


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def log_loss(y: np.ndarray, F: np.ndarray) -> float:
    """Mean logistic loss for labels in {0, 1} and raw scores ``F``."""
    F = np.asarray(F, dtype=float)
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


@dataclass
class Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row (``x <= threshold`` goes left)."""
        node = np.zeros(len(X), dtype=int)
        feature = np.array(self.feature)
        threshold = np.array(self.threshold)
        left, right = np.array(self.left), np.array(self.right)
        active = feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, feature[n]] <= threshold[n]
            node[rows] = np.where(go_left, left[n], right[n])
            active = feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array(self.value)[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls([int(x) for x in d["feature"]], [float(x) for x in d["threshold"]],
                   [int(x) for x in d["left"]], [int(x) for x in d["right"]], [float(x) for x in d["value"]])


class _SplitFinder:
    """Exact variance-reduction split search over presorted feature columns."""

    def __init__(self, X: np.ndarray, min_samples_leaf: int, min_gain: float):
        self.XT = np.ascontiguousarray(X.T)
        self.order = np.argsort(self.XT, axis=1, kind="stable")
        self.min_samples_leaf = min_samples_leaf
        self.min_gain = min_gain

    def best(self, members: np.ndarray, r: np.ndarray):
        """Return ``(gain, feature, threshold)`` or ``None`` when no split helps."""
        cnt = len(members)
        msl = self.min_samples_leaf
        if cnt < 2 * msl:
            return None
        mask = np.zeros(self.XT.shape[1], dtype=bool)
        mask[members] = True
        d = self.XT.shape[0]
        sel = self.order[mask[self.order]].reshape(d, cnt)
        xs = np.take_along_axis(self.XT, sel, axis=1)
        cs = np.cumsum(r[sel], axis=1)
        total = cs[:, -1:]
        left_sum = cs[:, :-1]
        nl = np.arange(1, cnt, dtype=float)
        nr = cnt - nl
        gain = left_sum ** 2 / nl + (total - left_sum) ** 2 / nr - total ** 2 / cnt
        valid = xs[:, :-1] < xs[:, 1:]
        valid &= (nl >= msl) & (nr >= msl)
        gain = np.where(valid, gain, -np.inf)
        flat = int(np.argmax(gain))
        f, pos = divmod(flat, cnt - 1)
        g = gain[f, pos]
        if not np.isfinite(g) or g <= self.min_gain:
            return None
        return float(g), int(f), float(xs[f, pos])


def grow_tree(finder: _SplitFinder, X: np.ndarray, r: np.ndarray, mode: str,
              max_depth: int, max_leaves: int) -> Tree:
    """Fit one regression tree to residuals ``r``; leaves hold the mean residual."""
    tree = Tree()
    root = tree.add_leaf(r.mean())
    members = {root: np.arange(len(r))}
    depth = {root: 0}

    def split(node: int, f: int, thr: float) -> list[int]:
        idx = members.pop(node)
        go_left = X[idx, f] <= thr
        children = []
        for part in (idx[go_left], idx[~go_left]):
            child = tree.add_leaf(r[part].mean())
            members[child] = part
            depth[child] = depth[node] + 1
            children.append(child)
        tree.feature[node], tree.threshold[node] = f, thr
        tree.left[node], tree.right[node] = children
        tree.value[node] = 0.0
        return children

    if mode == "levelwise":
        frontier = [root]
        for _ in range(max_depth):
            nxt = []
            for node in frontier:
                best = finder.best(members[node], r)
                if best is not None:
                    nxt.extend(split(node, best[1], best[2]))
            if not nxt:
                break
            frontier = nxt
    elif mode == "leafwise":
        heap: list = []

        def push(node: int) -> None:
            if max_depth > 0 and depth[node] >= max_depth:
                return
            best = finder.best(members[node], r)
            if best is not None:
                heapq.heappush(heap, (-best[0], node, best[1], best[2]))

        push(root)
        n_leaves = 1
        while heap and n_leaves < max_leaves:
            _, node, f, thr = heapq.heappop(heap)
            for child in split(node, f, thr):
                push(child)
            n_leaves += 1
    else:
        raise ValueError(f"mode must be 'levelwise' or 'leafwise', got {mode!r}")
    return tree


@dataclass
class GBTModel(TrainedModel):
    base_score: float = 0.0
    trees: list = field(default_factory=list)
    loss_history: list = field(default_factory=list)

    def raw_scores(self, X, n_rounds: int | None = None) -> np.ndarray:
        X = self._check(X)
        lr = self.hyperparameters["learning_rate"]
        F = np.full(len(X), self.base_score)
        for tree in self.trees[:n_rounds]:
            F += lr * tree.predict(X)
        return F

    def decision(self, X) -> np.ndarray:
        return self.raw_scores(X)

    def parameters(self) -> dict:
        return {"base_score": self.base_score, "trees": [t.to_dict() for t in self.trees],
                "loss_history": list(self.loss_history)}

    @classmethod
    def from_parameters(cls, kind, seed, hp, n_features, p) -> "GBTModel":
        return cls(kind, seed, hp, n_features, float(p["base_score"]),
                   [Tree.from_dict(t) for t in p["trees"]], list(p["loss_history"]))


def train_gbt(train: LabeledDataset, mode: str = "levelwise", rounds: int = 100,
              learning_rate: float = 0.1, max_depth: int | None = None, max_leaves: int = 31,
              min_samples_leaf: int = 1, subsample: float = 1.0, min_gain: float = 1e-12,
              seed: int = 0) -> GBTModel:
    """Boost regression trees on the logistic-loss residuals ``y - p``.

    ``levelwise`` caps depth (default 6); ``leafwise`` caps leaves (default 31)
    and always splits the leaf with the largest gain next. Leaves take the mean
    residual, which keeps the training loss non-increasing for learning rates
    below 8 when ``subsample == 1``.
    """
    if mode not in ("levelwise", "leafwise"):
        raise ValueError(f"mode must be 'levelwise' or 'leafwise', got {mode!r}")
    if max_depth is None:
        max_depth = 6 if mode == "levelwise" else -1
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not learning_rate > 0:
        raise ValueError("learning_rate must be > 0")
    if mode == "levelwise" and max_depth < 1:
        raise ValueError("levelwise growth needs max_depth >= 1")
    if max_leaves < 2 or min_samples_leaf < 1 or not 0 < subsample <= 1:
        raise ValueError("invalid tree hyperparameters")
    X, y = _xy(train)
    if len(y) == 0:
        raise ValueError("empty training set")
    p0 = float(np.clip(y.mean(), P_CLIP, 1 - P_CLIP))
    base = float(np.log(p0 / (1 - p0)))
    F = np.full(len(y), base)
    finder = _SplitFinder(X, min_samples_leaf, min_gain)
    rng = np.random.default_rng(seed)
    trees, history = [], [log_loss(y, F)]
    for _ in range(rounds):
        r = y - sigmoid(F)
        if subsample < 1.0:
            rows = np.sort(rng.choice(len(y), size=max(1, int(subsample * len(y))), replace=False))
            sub_finder = _SplitFinder(X[rows], min_samples_leaf, min_gain)
            tree = grow_tree(sub_finder, X[rows], r[rows], mode, max_depth, max_leaves)
        else:
            tree = grow_tree(finder, X, r, mode, max_depth, max_leaves)
        trees.append(tree)
        F = F + learning_rate * tree.predict(X)
        history.append(log_loss(y, F))
    hp = {"mode": mode, "rounds": rounds, "learning_rate": learning_rate, "max_depth": max_depth,
          "max_leaves": max_leaves, "min_samples_leaf": min_samples_leaf, "subsample": subsample,
          "min_gain": min_gain}
    return GBTModel(f"gbt_{mode}", seed, hp, X.shape[1], base, trees, history)
