"""Labeled datasets, balancing/splitting, and the sentiment classifiers."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import LABELS, NEGATIVE, POSITIVE

KINDS = ("nb", "knn", "svm", "gbt_levelwise", "gbt_leafwise")


def encode(labels: Sequence[str]) -> np.ndarray:
    bad = set(labels) - set(LABELS)
    if bad:
        raise ValueError(f"labels must be {LABELS}, got {sorted(bad)}")
    return np.array([1 if lab == POSITIVE else 0 for lab in labels], dtype=int)


def decode(y: np.ndarray) -> list[str]:
    return [POSITIVE if v else NEGATIVE for v in np.asarray(y)]


@dataclass
class LabeledDataset:
    """Comment ids with binary sentiment labels and (once featurized) a feature matrix."""

    ids: list[str]
    labels: list[str]
    X: np.ndarray | None = None

    def __post_init__(self):
        if len(self.ids) != len(self.labels):
            raise ValueError("ids and labels differ in length")
        encode(self.labels)
        if self.X is not None and len(self.X) != len(self.ids):
            raise ValueError("feature rows and ids differ in length")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def class_counts(self) -> dict[str, int]:
        c = Counter(self.labels)
        return {lab: c.get(lab, 0) for lab in LABELS}

    @property
    def y(self) -> np.ndarray:
        return encode(self.labels)

    def take(self, idx: Sequence[int]) -> "LabeledDataset":
        idx = list(idx)
        X = None if self.X is None else self.X[idx]
        return LabeledDataset([self.ids[i] for i in idx], [self.labels[i] for i in idx], X)

    def with_features(self, X: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(list(self.ids), list(self.labels), np.asarray(X, dtype=float))


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0
    oversample: bool = True
    split_first: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def balance_oversample(data: LabeledDataset, seed: int) -> LabeledDataset:
    """Upsample the minority class with replacement until both classes have equal counts.

    Original items keep their positions; replicas are appended.
    """
    y = data.y
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise ValueError(f"cannot balance: class counts are {data.class_counts}")
    if counts[0] == counts[1]:
        return data.take(range(len(data)))
    minority = int(np.argmin(counts))
    pool = np.flatnonzero(y == minority)
    rng = np.random.default_rng(seed)
    extra = rng.choice(pool, size=int(counts.max() - counts.min()), replace=True)
    return data.take(list(range(len(data))) + extra.tolist())


def n_train_items(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction + 1e-9))


def split(data: LabeledDataset, config: SplitConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified seeded split: each class contributes ``floor(n * fraction)`` items to train."""
    y = data.y
    rng = np.random.default_rng(config.seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) == 0:
            continue
        k = n_train_items(len(idx), config.train_fraction)
        if k < 1 or k >= len(idx):
            raise ValueError(f"class {LABELS[cls]!r} with {len(idx)} items cannot fill both folds "
                             f"at train_fraction={config.train_fraction}")
        perm = rng.permutation(idx)
        train_idx.extend(perm[:k].tolist())
        test_idx.extend(perm[k:].tolist())
    return data.take(train_idx), data.take(test_idx)


def prepare_folds(data: LabeledDataset, config: SplitConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Balance and split.

    Default order oversamples first and then splits, so replicas of one minority
    item may land in both folds. ``split_first`` splits the original items and
    oversamples only the training fold.
    """
    if config.split_first:
        train, test = split(data, config)
        if config.oversample:
            train = balance_oversample(train, config.seed)
        return train, test
    if config.oversample:
        data = balance_oversample(data, config.seed)
    return split(data, config)


# --------------------------------------------------------------------------- sparse matrix dumps


def dump_matrix(X: np.ndarray) -> dict:
    """Row-wise sparse encoding ``[[col, value], ...]``; values round-trip exactly through JSON."""
    X = np.asarray(X, dtype=float)
    rows = []
    for row in X:
        nz = np.flatnonzero(row)
        rows.append([[int(j), float(row[j])] for j in nz])
    return {"shape": list(X.shape), "rows": rows}


def load_matrix(d: dict) -> np.ndarray:
    X = np.zeros(tuple(d["shape"]))
    for i, row in enumerate(d["rows"]):
        for j, v in row:
            X[i, j] = v
    return X


# --------------------------------------------------------------------------- models


@dataclass
class TrainedModel:
    kind: str
    seed: int
    hyperparameters: dict = field(default_factory=dict)

    n_features: int = 0

    def decision(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_encoded(self, X) -> np.ndarray:
        X = self._check(X)
        if len(X) == 0:
            return np.zeros(0, dtype=int)
        return (self.decision(X) >= 0).astype(int)

    def predict(self, X) -> list[str]:
        return decode(self.predict_encoded(X))

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def parameters(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "n_features": self.n_features,
                "hyperparameters": self.hyperparameters, "parameters": self.parameters()}


@dataclass
class NaiveBayesModel(TrainedModel):
    log_prior: np.ndarray = None  # (2,) negative, positive
    log_lik: np.ndarray = None  # (2, d)

    def log_scores(self, X) -> np.ndarray:
        return self._check(X) @ self.log_lik.T + self.log_prior

    def decision(self, X) -> np.ndarray:
        s = self.log_scores(X)
        return s[:, 1] - s[:, 0]

    def parameters(self) -> dict:
        return {"log_prior": self.log_prior.tolist(), "log_lik": self.log_lik.tolist()}


def train_nb(train: LabeledDataset, alpha: float = 1.0, seed: int = 0) -> NaiveBayesModel:
    """Multinomial Naive Bayes with additive smoothing; features act as fractional counts."""
    X, y = _xy(train)
    if (X < 0).any():
        raise ValueError("multinomial Naive Bayes needs non-negative features")
    counts = np.bincount(y, minlength=2).astype(float)
    log_prior = np.log(counts / counts.sum(), where=counts > 0, out=np.full(2, -np.inf))
    mass = np.vstack([X[y == c].sum(axis=0) for c in (0, 1)])
    log_lik = np.log(mass + alpha) - np.log(mass.sum(axis=1, keepdims=True) + alpha * X.shape[1])
    return NaiveBayesModel("nb", seed, {"alpha": alpha}, X.shape[1], log_prior, log_lik)


def _sq_distances(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    out = np.empty((len(Q), len(X)))
    chunk = max(1, int(2e7 // max(1, X.size)))
    for s in range(0, len(Q), chunk):
        out[s:s + chunk] = ((Q[s:s + chunk, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
    return out


@dataclass
class KNNModel(TrainedModel):
    X: np.ndarray = None
    y: np.ndarray = None

    @property
    def k(self) -> int:
        return self.hyperparameters["k"]

    def decision(self, X) -> np.ndarray:
        d = _sq_distances(self._check(X), self.X)
        nearest = np.argsort(d, axis=1, kind="stable")[:, :self.k]
        pos = self.y[nearest].sum(axis=1)
        return pos - (self.k - pos)

    def parameters(self) -> dict:
        return {"X": dump_matrix(self.X), "y": self.y.tolist()}


def train_knn(train: LabeledDataset, k: int, seed: int = 0) -> KNNModel:
    """Memorize the training set; predict by majority over the ``k`` nearest (Euclidean) items."""
    X, y = _xy(train)
    if k < 1 or k > len(y):
        raise ValueError(f"k={k} must lie in [1, {len(y)}]")
    return KNNModel("knn", seed, {"k": k}, X.shape[1], X.copy(), y.copy())


@dataclass
class LinearSVMModel(TrainedModel):
    w: np.ndarray = None
    b: float = 0.0
    loss_history: list = field(default_factory=list)

    def decision(self, X) -> np.ndarray:
        return self._check(X) @ self.w + self.b

    def parameters(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "loss_history": list(self.loss_history)}


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y_pm: np.ndarray, lam: float) -> float:
    """``lam/2 * (|w|^2 + b^2) + mean hinge``; the bias is regularized like a constant feature."""
    margins = y_pm * (X @ w + b)
    return float(lam / 2 * (w @ w + b * b) + np.maximum(0.0, 1.0 - margins).mean())


def train_svm(train: LabeledDataset, epochs: int = 20, lam: float = 1e-3, seed: int = 0) -> LinearSVMModel:
    """Linear SVM by seeded stochastic subgradient descent (step ``1 / (lam * t)``)."""
    X, y = _xy(train)
    if len(y) == 0:
        raise ValueError("empty training set")
    if epochs < 1 or lam <= 0:
        raise ValueError("epochs must be >= 1 and lambda > 0")
    y_pm = np.where(y == 1, 1.0, -1.0)
    Xa = np.hstack([X, np.ones((len(X), 1))])
    w = np.zeros(Xa.shape[1])
    radius = 1.0 / math.sqrt(lam)
    rng = np.random.default_rng(seed)
    history = [svm_objective(w[:-1], w[-1], X, y_pm, lam)]
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(y)):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y_pm[i] * (Xa[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y_pm[i] * Xa[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
        history.append(svm_objective(w[:-1], w[-1], X, y_pm, lam))
    return LinearSVMModel("svm", seed, {"epochs": epochs, "lambda": lam}, X.shape[1],
                          w[:-1].copy(), float(w[-1]), history)


def _xy(data: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    if data.X is None:
        raise ValueError("dataset has no features")
    return np.asarray(data.X, dtype=float), data.y


def train_model(kind: str, train: LabeledDataset, seed: int, params: dict | None = None) -> TrainedModel:
    from .gbt import train_gbt

    params = dict(params or {})
    if kind == "nb":
        return train_nb(train, seed=seed, **params)
    if kind == "knn":
        return train_knn(train, seed=seed, **params)
    if kind == "svm":
        return train_svm(train, seed=seed, **params)
    if kind in ("gbt_levelwise", "gbt_leafwise"):
        return train_gbt(train, mode=kind.split("_")[1], seed=seed, **params)
    raise ValueError(f"unknown model kind {kind!r}")


def predict(model: TrainedModel, X) -> list[str]:
    return model.predict(X)


def load_model(d: dict) -> TrainedModel:
    from .gbt import GBTModel

    kind, seed, hp, nf, p = d["kind"], d["seed"], d["hyperparameters"], d["n_features"], d["parameters"]
    if kind == "nb":
        return NaiveBayesModel(kind, seed, hp, nf, np.array(p["log_prior"]), np.array(p["log_lik"]))
    if kind == "knn":
        return KNNModel(kind, seed, hp, nf, load_matrix(p["X"]), np.array(p["y"], dtype=int))
    if kind == "svm":
        return LinearSVMModel(kind, seed, hp, nf, np.array(p["w"]), float(p["b"]), list(p["loss_history"]))
    if kind.startswith("gbt_"):
        return GBTModel.from_parameters(kind, seed, hp, nf, p)
    raise ValueError(f"unknown model kind {kind!r}")
