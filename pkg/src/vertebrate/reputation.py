"""Brand-to-topic association by cosine similarity."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Comment, PreprocessConfig, normalize_text, tokenize
from .topicmodel import TopicModel
from .vectorspace import EmbeddingMatrix, cosine_similarity

logger = logging.getLogger(__name__)

MENTION_CENTROID = "mention-centroid"
NAME_EMBEDDING = "name-embedding"


class ReputationError(ValueError):
    pass


@dataclass(frozen=True)
class BrandSpec:
    name: str
    aliases: tuple[tuple[str, ...], ...]  # each alias as a token sequence

    @classmethod
    def from_config(cls, rec: dict, config: PreprocessConfig | None = None) -> "BrandSpec":
        config = config or PreprocessConfig()
        raw = rec.get("aliases") or [rec["name"]]
        aliases = tuple(t for t in (tuple(tokenize(normalize_text(a, config))) for a in raw) if t)
        if not aliases:
            raise ReputationError(f"brand {rec['name']!r} has no usable aliases")
        return cls(rec["name"], aliases)


@dataclass(frozen=True)
class Brand:
    name: str
    aliases: tuple[tuple[str, ...], ...]
    vector: np.ndarray
    n_mentions: int = 0


def load_brands(path: str | Path, config: PreprocessConfig | None = None) -> list[BrandSpec]:
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise ReputationError("brand config must be a JSON list")
    return [BrandSpec.from_config(r, config) for r in records]


def mentions(tokens: Sequence[str], alias: Sequence[str]) -> bool:
    """Single-token aliases match inside any token; longer aliases need a contiguous token run."""
    if len(alias) == 1:
        return any(alias[0] in tok for tok in tokens)
    n = len(alias)
    return any(tuple(tokens[i:i + n]) == tuple(alias) for i in range(len(tokens) - n + 1))


def build_brand_vectors(brands: Sequence[BrandSpec], comments: Sequence[Comment],
                        embeddings: EmbeddingMatrix | None, mode: str = MENTION_CENTROID,
                        provider=None) -> list[Brand]:
    """One vector per brand; unmentioned brands are skipped in mention-centroid mode."""
    out = []
    if mode == MENTION_CENTROID:
        if embeddings is None:
            raise ReputationError("mention-centroid mode needs comment embeddings")
        pos = {cid: i for i, cid in enumerate(embeddings.ids)}
        tokens = [(c.id, tokenize(c.clean_text)) for c in comments]
        for b in brands:
            hits = [cid for cid, toks in tokens
                    if cid in pos and any(mentions(toks, a) for a in b.aliases)]
            if not hits:
                logger.warning("brand %r is never mentioned; skipped", b.name)
                continue
            vec = embeddings.rows[[pos[c] for c in hits]].mean(axis=0)
            out.append(Brand(b.name, b.aliases, vec, len(hits)))
    elif mode == NAME_EMBEDDING:
        if provider is None:
            raise ReputationError("name-embedding mode needs an embedding provider")
        vectors = provider.embed_texts([b.name for b in brands])
        out = [Brand(b.name, b.aliases, np.asarray(v, dtype=float)) for b, v in zip(brands, vectors)]
    else:
        raise ReputationError(f"unknown brand vector mode {mode!r}")
    if brands and not out:
        raise ReputationError("no configured brand could be matched")
    return out


def rank_topics(brand: Brand, model: TopicModel, top_n: int = 5) -> list[tuple[int, str, float]]:
    """Topics by descending cosine similarity to the brand vector (outlier excluded)."""
    if not np.any(brand.vector):
        raise ReputationError(f"brand {brand.name!r} has a zero vector")
    scored = [(t.topic_id, t.display_name(), cosine_similarity(brand.vector, t.centroid))
              for t in model.topics if t.centroid is not None]
    scored.sort(key=lambda r: (-r[2], r[0]))
    return scored[:top_n]


def reputation_report(brands: Sequence[Brand], model: TopicModel, top_n: int = 5) -> dict:
    if not brands:
        raise ReputationError("empty brand list")
    report = {}
    for b in brands:
        report[b.name] = [{"topic_id": tid, "name": name, "similarity": sim}
                          for tid, name, sim in rank_topics(b, model, top_n)]
    return report
