"""TF-IDF features, embedding providers, PCA and cosine similarity."""

from __future__ import annotations

import json
import logging
import os
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Comment, tokenize
from .io import iter_jsonl

logger = logging.getLogger(__name__)

EMBED_URL_ENV = "VERTEBRATE_EMBED_URL"


class EmbeddingError(RuntimeError):
    pass


# --------------------------------------------------------------------------- TF-IDF


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def index(self) -> dict[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self) -> np.ndarray:
        """Smoothed idf: ln((1 + N) / (1 + df)) + 1."""
        df = np.asarray(self.df, dtype=float)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def to_dict(self) -> dict:
        return {"terms": list(self.terms), "df": list(self.df), "n_docs": self.n_docs}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(tuple(d["terms"]), tuple(int(x) for x in d["df"]), int(d["n_docs"]))


@dataclass(frozen=True)
class DocVector:
    doc_id: str
    values: np.ndarray
    norm: float


def fit_tfidf(token_lists: Sequence[Sequence[str]]) -> Vocabulary:
    """Count document frequencies; terms are indexed in lexicographic order."""
    if not token_lists or not any(len(t) for t in token_lists):
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df: Counter = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    terms = tuple(sorted(df))
    return Vocabulary(terms, tuple(df[t] for t in terms), len(token_lists))


def transform_tfidf(tokens: Sequence[str], vocab: Vocabulary, doc_id: str = "",
                    normalize: bool = True) -> DocVector:
    idf = vocab.idf()
    values = np.zeros(len(vocab))
    index = vocab.index
    for tok in tokens:
        j = index.get(tok)
        if j is not None:
            values[j] += 1.0
    values *= idf
    norm = float(np.linalg.norm(values))
    if normalize and norm > 0:
        values /= norm
        norm = float(np.linalg.norm(values))
    return DocVector(doc_id, values, norm)


def tfidf_matrix(token_lists: Sequence[Sequence[str]], vocab: Vocabulary) -> np.ndarray:
    """Row-stacked, L2-normalized TF-IDF vectors."""
    if not token_lists:
        return np.zeros((0, len(vocab)))
    return np.vstack([transform_tfidf(t, vocab).values for t in token_lists])


# --------------------------------------------------------------------------- embeddings


@dataclass(frozen=True)
class EmbeddingMatrix:
    ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("embedding rows must form a 2-D array")
        if rows.shape[0] != len(self.ids):
            raise ValueError(f"{len(self.ids)} ids but {rows.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("embedding ids must be unique")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        pos = {i: k for k, i in enumerate(self.ids)}
        return EmbeddingMatrix(tuple(ids), self.rows[[pos[i] for i in ids]])

    def row(self, doc_id: str) -> np.ndarray:
        return self.rows[self.ids.index(doc_id)]


def _doc_text(doc: Comment) -> str:
    return doc.clean_text or doc.raw_text


class FileEmbeddingProvider:
    """Precomputed vectors from a JSONL file of ``{"id": ..., "vector": [...]}`` records."""

    name = "file"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._vectors: dict[str, list[float]] | None = None

    def _load(self) -> dict[str, list[float]]:
        if self._vectors is not None:
            return self._vectors
        if not self.path.exists():
            raise EmbeddingError(f"embedding file not found: {self.path}")
        vectors: dict[str, list[float]] = {}
        dim = None
        for lineno, line in iter_jsonl(self.path):
            try:
                rec = json.loads(line)
                doc_id, vec = rec["id"], rec["vector"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EmbeddingError(f"{self.path.name}:{lineno}: bad embedding record ({exc})") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingError(
                    f"{self.path.name}:{lineno}: dimension mismatch ({len(vec)} != {dim})")
            vectors[doc_id] = vec
        self._vectors = vectors
        return vectors

    def embed(self, docs: Sequence[Comment]) -> EmbeddingMatrix:
        vectors = self._load()
        missing = [d.id for d in docs if d.id not in vectors]
        if missing:
            shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
            raise EmbeddingError(f"missing embeddings for {len(missing)} id(s): {shown}")
        return EmbeddingMatrix(tuple(d.id for d in docs), np.array([vectors[d.id] for d in docs], dtype=float))

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        raise EmbeddingError("the file provider cannot embed arbitrary text")


class HttpEmbeddingProvider:
    """Client for a service answering ``POST /embed {"texts": [...]}`` with ``{"vectors": [...]}``."""

    name = "http"

    def __init__(self, url: str | None = None, batch_size: int = 64, timeout: float = 30.0):
        url = os.environ.get(EMBED_URL_ENV) or url
        if not url:
            raise EmbeddingError(f"no embedding service URL configured (set {EMBED_URL_ENV})")
        self.url = url.rstrip("/")
        if not self.url.endswith("/embed"):
            self.url += "/embed"
        self.batch_size = batch_size
        self.timeout = timeout

    def _post(self, texts: list[str]) -> list[list[float]]:
        body = json.dumps({"texts": texts}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError) as exc:
            raise EmbeddingError(f"embedding service unreachable at {self.url}: {exc}") from exc
        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbeddingError("embedding service returned a malformed or misaligned response")
        return vectors

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            out.extend(self._post(list(texts[start:start + self.batch_size])))
        dims = {len(v) for v in out}
        if len(dims) > 1:
            raise EmbeddingError(f"embedding service returned mixed dimensions {sorted(dims)}")
        return np.array(out, dtype=float).reshape(len(texts), -1)

    def embed(self, docs: Sequence[Comment]) -> EmbeddingMatrix:
        return EmbeddingMatrix(tuple(d.id for d in docs), self.embed_texts([_doc_text(d) for d in docs]))


class BuiltinEmbeddingProvider:
    """Self-contained fallback: TF-IDF over the corpus, projected to ``dim`` principal components."""

    name = "builtin"

    def __init__(self, dim: int = 32):
        self.dim = dim
        self.vocab: Vocabulary | None = None
        self.pca: PCA | None = None

    def fit(self, texts: Sequence[str]) -> "BuiltinEmbeddingProvider":
        tokens = [tokenize(t) for t in texts]
        self.vocab = fit_tfidf(tokens)
        self.pca = PCA.fit(tfidf_matrix(tokens, self.vocab), self.dim)
        return self

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if self.vocab is None:
            raise EmbeddingError("builtin provider used before fit")
        return self.pca.transform(tfidf_matrix([tokenize(t) for t in texts], self.vocab))

    def embed(self, docs: Sequence[Comment]) -> EmbeddingMatrix:
        texts = [_doc_text(d) for d in docs]
        if self.vocab is None:
            self.fit(texts)
        return EmbeddingMatrix(tuple(d.id for d in docs), self.embed_texts(texts))


def embed(docs: Sequence[Comment], provider) -> EmbeddingMatrix:
    matrix = provider.embed(docs)
    if len(matrix) != len(docs):
        raise EmbeddingError("provider returned the wrong number of rows")
    return matrix


# --------------------------------------------------------------------------- PCA


@dataclass(frozen=True)
class PCA:
    mean: np.ndarray
    components: np.ndarray  # (out_dim, dim), rows are unit principal axes
    explained_variance: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, out_dim: int) -> "PCA":
        X = np.asarray(X, dtype=float)
        n, dim = X.shape
        if n < 2:
            raise ValueError("PCA needs at least 2 rows")
        if out_dim > dim or out_dim < 1:
            raise ValueError(f"out_dim must be in [1, {dim}], got {out_dim}")
        mean = X.mean(axis=0)
        Xc = X - mean
        cov = Xc.T @ Xc / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(-evals, kind="stable")[:out_dim]
        comps = evecs[:, order].T.copy()
        for row in comps:
            if row[np.argmax(np.abs(row))] < 0:
                row *= -1
        return cls(mean, comps, evals[order])

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T


def pca_reduce(matrix: EmbeddingMatrix, out_dim: int) -> EmbeddingMatrix:
    pca = PCA.fit(matrix.rows, out_dim)
    return EmbeddingMatrix(matrix.ids, pca.transform(matrix.rows))


# --------------------------------------------------------------------------- cosine


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(min(1.0, max(-1.0, float(a @ b) / (na * nb))))


def make_provider(kind: str, *, path=None, url=None, dim: int = 32, batch_size: int = 64,
                  timeout: float = 30.0):
    if kind == "file":
        if path is None:
            raise EmbeddingError("file provider requires an embeddings path")
        return FileEmbeddingProvider(path)
    if kind == "http":
        return HttpEmbeddingProvider(url, batch_size=batch_size, timeout=timeout)
    if kind == "builtin":
        return BuiltinEmbeddingProvider(dim)
    raise EmbeddingError(f"unknown embedding provider {kind!r}")


__all__ = [
    "Vocabulary", "DocVector", "EmbeddingMatrix", "PCA", "EmbeddingError",
    "fit_tfidf", "transform_tfidf", "tfidf_matrix", "embed", "pca_reduce", "cosine_similarity",
    "FileEmbeddingProvider", "HttpEmbeddingProvider", "BuiltinEmbeddingProvider", "make_provider",
]
