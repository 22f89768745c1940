"""Word n-gram frequency tables."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .io import atomic_write_text


@dataclass(frozen=True)
class NgramSpec:
    n: int
    top_k: int = 10

    def __post_init__(self):
        if self.n < 1 or self.top_k < 1:
            raise ValueError(f"n and top_k must be >= 1, got n={self.n}, top_k={self.top_k}")


@dataclass(frozen=True)
class NgramTable:
    n: int
    entries: tuple[tuple[tuple[str, ...], int], ...]

    def rows(self) -> list[tuple[str, int]]:
        return [(" ".join(gram), freq) for gram, freq in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["gram", "frequency"])
        writer.writerows(self.rows())
        return buf.getvalue()


def count_ngrams(tokens_per_comment: Iterable[Sequence[str]], n: int) -> Counter:
    """Sliding-window counts; windows never cross comment boundaries."""
    counts: Counter = Counter()
    for tokens in tokens_per_comment:
        tokens = tuple(tokens)
        for i in range(len(tokens) - n + 1):
            counts[tokens[i:i + n]] += 1
    return counts


def rank_counts(counts: Counter, top_k: int | None = None) -> list[tuple[tuple[str, ...], int]]:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if top_k is None else ranked[:top_k]


def extract_ngrams(tokens_per_comment: Iterable[Sequence[str]], spec: NgramSpec) -> NgramTable:
    counts = count_ngrams(tokens_per_comment, spec.n)
    return NgramTable(spec.n, tuple(rank_counts(counts, spec.top_k)))


def ngram_report(tokens_per_comment: Sequence[Sequence[str]], specs: Iterable[NgramSpec],
                 out_dir: str | Path) -> list[Path]:
    """Write ``ngrams_n{n}.csv`` per spec into ``out_dir``; returns the written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    paths = []
    for spec in specs:
        table = extract_ngrams(tokens_per_comment, spec)
        paths.append(atomic_write_text(out_dir / f"ngrams_n{spec.n}.csv", table.to_csv()))
    return paths
