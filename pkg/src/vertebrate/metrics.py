"""Confusion matrices, weighted precision/recall/F1 and Cohen's kappa."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import LABELS

# Upper bounds (inclusive) of each agreement band; anything above 0.90 is almost perfect.
KAPPA_BANDS = (
    (0.20, "none"),
    (0.39, "minimal"),
    (0.59, "weak"),
    (0.79, "moderate"),
    (0.90, "strong"),
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed ``[truth, prediction]`` with classes ordered as ``labels``."""

    counts: np.ndarray
    labels: tuple[str, ...] = LABELS

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=int)
        if counts.shape != (len(self.labels), len(self.labels)) or (counts < 0).any():
            raise ValueError("confusion counts must be a square non-negative matrix")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class KappaResult:
    p_o: float
    p_e: float
    kappa: float
    band: str


def confusion(truth: Sequence[str], pred: Sequence[str], labels: Sequence[str] = LABELS) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} truth vs {len(pred)} predictions")
    if len(truth) == 0:
        raise ValueError("cannot build a confusion matrix from empty input")
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(truth, pred):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, tuple(labels))


def prf(cm: ConfusionMatrix, average: str = "weighted") -> tuple[float, float, float, float]:
    """Accuracy plus precision, recall and F1 averaged over classes.

    ``weighted`` weights each class by its true support, ``macro`` equally. A
    class never predicted has precision 0 (and F1 0).
    """
    if cm.n < 1:
        raise ValueError("metrics need at least one item")
    c = cm.counts.astype(float)
    tp = np.diag(c)
    support = c.sum(axis=1)
    predicted = c.sum(axis=0)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    if average == "weighted":
        w = support / support.sum()
    elif average == "macro":
        w = np.full(len(tp), 1.0 / len(tp))
    else:
        raise ValueError(f"average must be 'weighted' or 'macro', got {average!r}")
    accuracy = tp.sum() / cm.n
    return float(accuracy), float(w @ precision), float(w @ recall), float(w @ f1)


def kappa_band(kappa: float) -> str:
    for upper, name in KAPPA_BANDS:
        if kappa <= upper:
            return name
    return "almost_perfect"


def cohens_kappa(cm: ConfusionMatrix) -> KappaResult:
    n = cm.n
    if n < 1:
        raise ValueError("kappa needs at least one item")
    c = cm.counts.astype(float)
    p_o = float(np.trace(c) / n)
    p_e = float((c.sum(axis=1) / n) @ (c.sum(axis=0) / n))
    if p_e >= 1.0:
        raise ValueError("kappa is undefined when chance agreement is 1 (all items in one cell)")
    kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaResult(p_o, p_e, kappa, kappa_band(kappa))


def evaluate(truth: Sequence[str], pred: Sequence[str], average: str = "weighted") -> dict:
    cm = confusion(truth, pred)
    acc, p, r, f1 = prf(cm, average)
    k = cohens_kappa(cm)
    return {"accuracy": acc, "precision": p, "recall": r, "f1": f1, "kappa": k.kappa,
            "band": k.band, "confusion": cm.to_list(), "n": cm.n}
