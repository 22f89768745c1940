"""Pipeline stages. Each stage reads upstream artifacts from the run directory and
writes its own, then records checksums in ``manifest.json``."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import LABELS, __version__
from .classify import LabeledDataset, SplitConfig, load_model, prepare_folds, train_model
from .clades import (CladeCut, Clade, assign_clade_sentiments, cut_dendrogram,
                     default_threshold, propagate_labels, read_sentiment_csv, ward_cluster)
from .config import PipelineConfig
from .corpus import Corpus, PreprocessConfig, load_stopwords, normalize_text, tokenize
from .io import (atomic_write_json, atomic_write_jsonl, atomic_write_text, iter_jsonl, read_json,
                 sha256_file)
from .metrics import evaluate, kappa_band
from .ngrams import NgramSpec, ngram_report
from .plots import dendrogram_chart, hbar_chart, line_chart
from .reputation import build_brand_vectors, load_brands, reputation_report
from .topicmodel import (OUTLIER_ID, TopicModel, fit_topics, load_topic_names, temporal_distribution,
                         topic_shares, topic_terms)
from .vectorspace import (EmbeddingMatrix, Vocabulary, fit_tfidf, make_provider, pca_reduce,
                          tfidf_matrix)

logger = logging.getLogger(__name__)

STAGES = ("ngrams", "topics", "clades", "label", "train", "evaluate", "reputation", "report")


class StageError(RuntimeError):
    pass


class LockError(RuntimeError):
    pass


@contextmanager
def run_lock(out_dir: Path):
    """Exclusive ownership of ``out_dir`` for the duration of a run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{out_dir} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


class Run:
    """Shared state for the stages of one pipeline invocation."""

    def __init__(self, config: PipelineConfig, out_dir: str | Path | None = None, strict: bool = False):
        self.config = config
        self.out = Path(out_dir if out_dir is not None else config.out_dir)
        self.strict = strict
        self._corpus: Corpus | None = None
        self._embeddings: EmbeddingMatrix | None = None
        self._provider = None

    # ------------------------------------------------------------------ inputs

    def preprocess_config(self, stopwords: bool = True) -> PreprocessConfig:
        pc = self.config.preprocess
        words = frozenset()
        if stopwords and pc.remove_stopwords:
            words = load_stopwords(self.config.path("stopwords"))
        return PreprocessConfig(stopwords=words, strip_emoji=pc.strip_emoji, lowercase=pc.lowercase)

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = Corpus.load(self.config.path("comments"), self.config.path("posts"),
                                       self.preprocess_config(), strict=self.strict)
            if not len(self._corpus):
                raise StageError("the corpus contains no valid comments")
        return self._corpus

    @property
    def provider(self):
        if self._provider is None:
            e = self.config.embedding
            self._provider = make_provider(e.provider, path=self.config.path("embeddings"), url=e.url,
                                           dim=e.dim, batch_size=e.batch_size, timeout=e.timeout)
        return self._provider

    @property
    def embeddings(self) -> EmbeddingMatrix:
        if self._embeddings is None:
            self._embeddings = self.provider.embed(self.corpus.comments)
        return self._embeddings

    # ------------------------------------------------------------------ artifacts

    def artifact(self, stage: str, name: str) -> Path:
        return self.out / stage / name

    def require(self, stage: str, name: str) -> Path:
        p = self.artifact(stage, name)
        if not p.exists():
            raise StageError(f"missing {stage}/{name}: run `{stage}` first")
        return p

    def record(self, stage: str, paths: list[Path], seconds: float) -> None:
        manifest_path = self.out / "manifest.json"
        manifest = read_json(manifest_path) if manifest_path.exists() else {}
        manifest["tool_version"] = __version__
        manifest["config"] = self.config.to_dict()
        stages = manifest.setdefault("stages", {})
        stages[stage] = {
            "seconds": round(seconds, 4),
            "artifacts": {p.relative_to(self.out).as_posix(): sha256_file(p) for p in sorted(paths)},
        }
        atomic_write_json(manifest_path, manifest)

    def load_topics(self) -> TopicModel:
        return TopicModel.from_dict(read_json(self.require("topics", "topics.json")))


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "brand"


# ---------------------------------------------------------------------- stages


def stage_ngrams(run: Run) -> list[Path]:
    cfg = run.config.ngrams
    if cfg.source == "raw":
        pc = run.preprocess_config(stopwords=False)
        tokens = [tokenize(normalize_text(c.raw_text, pc)) for c in run.corpus.comments]
    elif cfg.source == "clean":
        tokens = run.corpus.tokens()
    else:
        raise StageError(f"ngrams.source must be 'raw' or 'clean', got {cfg.source!r}")
    specs = [NgramSpec(n, cfg.top_k) for n in cfg.ns]
    return ngram_report(tokens, specs, run.out / "ngrams")


def stage_topics(run: Run) -> list[Path]:
    cfg = run.config.topics
    full = run.embeddings
    reduced = full
    if cfg.pca_dim and cfg.pca_dim < full.dim:
        reduced = pca_reduce(full, cfg.pca_dim)
    model = fit_topics(reduced, cfg.eps, cfg.min_members, full=full)
    tokens = {c.id: tokenize(c.clean_text) for c in run.corpus.comments}
    topic_terms(model, tokens, cfg.top_terms)
    names_path = run.config.path("topic_names")
    if names_path is not None:
        model.apply_names(load_topic_names(names_path))
    model.params.update({"pca_dim": cfg.pca_dim, "provider": run.config.embedding.provider})

    out = []
    out.append(atomic_write_json(run.artifact("topics", "topics.json"), model.to_dict()))
    shares = topic_shares(model, len(run.corpus))
    names = {t.topic_id: t.display_name() for t in model.all_topics()}
    rows = [[tid, names[tid], count, f"{pct:.6f}"] for tid, count, pct in shares]
    out.append(atomic_write_text(run.artifact("topics", "shares.csv"),
                                 _csv_text(["topic_id", "name", "count", "percentage"], rows)))
    out.append(atomic_write_text(run.artifact("topics", "shares.svg"), hbar_chart(
        [names[t] for t, _, _ in shares], [p for _, _, p in shares], "Topic share of comments (%)",
        [f"{p:.2f}%" for _, _, p in shares])))

    wanted = cfg.temporal_topics
    if wanted is None:
        wanted = [t.topic_id for t in sorted(model.topics, key=lambda t: (-t.count, t.topic_id))[:5]]
    series = temporal_distribution(model, run.corpus.comments, cfg.temporal_bin, wanted)
    out.append(atomic_write_json(run.artifact("topics", "temporal.json"),
                                 {"bin": cfg.temporal_bin, "series": [s.to_dict() for s in series]}))
    for s in series:
        x = [d.isoformat() for d, _ in s.bins]
        svg = line_chart({names[s.topic_id]: [c for _, c in s.bins]}, x,
                         f"Temporal distribution: {names[s.topic_id]}")
        out.append(atomic_write_text(run.artifact("topics", f"temporal_topic_{s.topic_id}.svg"), svg))
    return out


def stage_clades(run: Run) -> list[Path]:
    cfg = run.config.clades
    model = run.load_topics()
    excluded = set(cfg.exclusions)
    leaves = [t for t in model.topics if t.topic_id not in excluded and t.centroid is not None]
    if len(leaves) < 2:
        raise StageError(f"clades: need at least 2 non-excluded topics, found {len(leaves)}")
    d = ward_cluster(np.vstack([t.centroid for t in leaves]), [t.topic_id for t in leaves])
    try:
        if cfg.n_clades is not None:
            cut = cut_dendrogram(d, n_clades=cfg.n_clades)
        else:
            cut = cut_dendrogram(d, threshold=cfg.threshold or default_threshold(d, cfg.threshold_ratio))
    except ValueError as exc:
        raise StageError(f"clades: {exc}") from exc
    names = {t.topic_id: t.display_name() for t in model.topics}
    out = [
        atomic_write_json(run.artifact("clades", "dendrogram.json"), {**d.to_dict(), "names": {
            str(t): names[t] for t in d.leaves}}),
        atomic_write_json(run.artifact("clades", "clades.json"), {**cut.to_dict(), "excluded_topics": sorted(excluded)}),
        atomic_write_text(run.artifact("clades", "dendrogram.svg"), dendrogram_chart(d, names, cut)),
    ]
    return out


def _load_cut(run: Run) -> CladeCut:
    d = read_json(run.require("clades", "clades.json"))
    return CladeCut(d["threshold"], d["n_clades"],
                    [Clade(c["clade_id"], tuple(c["topics"])) for c in d["clades"]])


def stage_label(run: Run) -> list[Path]:
    model = run.load_topics()
    cut = _load_cut(run)
    assignment = {}
    sent_path = run.config.path("clade_sentiments")
    if sent_path is not None:
        assignment = read_sentiment_csv(sent_path, "clade_id")
    elif run.strict:
        raise StageError("label: inputs.clade_sentiments is required in strict mode")
    overrides_path = run.config.path("topic_overrides")
    overrides = read_sentiment_csv(overrides_path, "topic_id") if overrides_path else {}
    exclusions = set(run.config.clades.exclusions) | {OUTLIER_ID}
    try:
        labels = assign_clade_sentiments(cut, assignment, exclusions, overrides, strict=run.strict)
    except ValueError as exc:
        raise StageError(f"label: {exc}") from exc
    data = propagate_labels(labels, model)
    text = {c.id: c.clean_text for c in run.corpus.comments}
    topic_of = model.assignments()
    records = [{"id": cid, "label": lab, "topic_id": topic_of[cid], "clean_text": text.get(cid, "")}
               for cid, lab in zip(data.ids, data.labels)]
    summary = {"class_counts": data.class_counts, **labels.to_dict()}
    return [
        atomic_write_jsonl(run.artifact("label", "labeled.jsonl"), records),
        atomic_write_json(run.artifact("label", "label_summary.json"), summary),
    ]


def _load_labeled(run: Run) -> tuple[LabeledDataset, dict[str, str]]:
    ids, labels, text = [], [], {}
    for _, line in iter_jsonl(run.require("label", "labeled.jsonl")):
        rec = json.loads(line)
        ids.append(rec["id"])
        labels.append(rec["label"])
        text[rec["id"]] = rec["clean_text"]
    return LabeledDataset(ids, labels), text


def model_variants(models: dict) -> list[tuple[str, str, dict]]:
    """``(name, kind, params)`` triples; a KNN ``k`` list expands into one variant per k."""
    out = []
    for kind, params in models.items():
        if kind == "knn":
            ks = params.get("k", [10])
            for k in ks if isinstance(ks, list) else [ks]:
                out.append((f"knn_k{k}", "knn", {**params, "k": int(k)}))
        else:
            out.append((kind, kind, dict(params)))
    return out


def stage_train(run: Run) -> list[Path]:
    cfg = run.config.classify
    data, text = _load_labeled(run)
    counts = data.class_counts
    if min(counts.values()) == 0:
        raise StageError(f"train: labeled dataset needs both classes, got {counts}")
    unique_ids = sorted(set(data.ids))
    vocab = fit_tfidf([tokenize(text[i]) for i in unique_ids])
    X = tfidf_matrix([tokenize(text[i]) for i in data.ids], vocab)
    data = data.with_features(X)
    out = [atomic_write_json(run.artifact("train", "vocabulary.json"), vocab.to_dict())]
    splits = {}
    for seed in cfg.seeds:
        train, test = prepare_folds(data, SplitConfig(cfg.train_fraction, seed, cfg.oversample, cfg.split_first))
        splits[str(seed)] = {"train": train.ids, "test": test.ids,
                             "train_counts": train.class_counts, "test_counts": test.class_counts}
        for name, kind, params in model_variants(cfg.models):
            try:
                model = train_model(kind, train, seed, params)
            except ValueError as exc:
                raise StageError(f"train: {name} (seed {seed}): {exc}") from exc
            out.append(atomic_write_json(run.artifact("train", f"models/{name}_seed{seed}.json"),
                                         {"name": name, **model.to_dict()}))
    mode = "split-first" if cfg.split_first else "oversample-first"
    out.append(atomic_write_json(run.artifact("train", "splits.json"),
                                 {"mode": mode, "oversample": cfg.oversample,
                                  "train_fraction": cfg.train_fraction, "seeds": splits}))
    return out


def stage_evaluate(run: Run) -> list[Path]:
    cfg = run.config.classify
    data, text = _load_labeled(run)
    label_of = dict(zip(data.ids, data.labels))
    vocab = Vocabulary.from_dict(read_json(run.require("train", "vocabulary.json")))
    splits = read_json(run.require("train", "splits.json"))
    rows = []
    for name, kind, params in model_variants(cfg.models):
        per_seed = []
        for seed in cfg.seeds:
            path = run.require("train", f"models/{name}_seed{seed}.json")
            model = load_model(read_json(path))
            test_ids = splits["seeds"][str(seed)]["test"]
            X = tfidf_matrix([tokenize(text[i]) for i in test_ids], vocab)
            pred = model.predict(X)
            m = evaluate([label_of[i] for i in test_ids], pred, cfg.average)
            row = {"model": name, "seed": seed, **m}
            if kind == "knn":
                row["neighbors"] = params["k"]
            per_seed.append(row)
        avg = {"model": name, "seed": "AVERAGE"}
        for key in ("accuracy", "precision", "recall", "f1", "kappa"):
            avg[key] = float(np.mean([r[key] for r in per_seed]))
        avg["band"] = kappa_band(avg["kappa"])
        if kind == "knn":
            avg["neighbors"] = params["k"]
        rows.extend(per_seed + [avg])
    report = {"average": cfg.average, "split_mode": splits["mode"], "labels": list(LABELS), "rows": rows}
    header = ["model", "neighbors", "seed", "accuracy", "precision", "recall", "f1", "kappa", "band"]
    csv_rows = [[r["model"], r.get("neighbors", ""), r["seed"]]
                + [f"{r[k]:.6f}" for k in ("accuracy", "precision", "recall", "f1", "kappa")] + [r["band"]]
                for r in rows]
    return [
        atomic_write_json(run.artifact("evaluate", "evaluation.json"), report),
        atomic_write_text(run.artifact("evaluate", "evaluation.csv"), _csv_text(header, csv_rows)),
    ]


def stage_reputation(run: Run) -> list[Path]:
    cfg = run.config.reputation
    brands_path = run.config.path("brands")
    if brands_path is None:
        raise StageError("reputation: inputs.brands is required")
    model = run.load_topics()
    specs = load_brands(brands_path, run.preprocess_config(stopwords=False))
    provider = None
    if cfg.mode == "name-embedding":
        provider = run.provider
        run.embeddings  # fits the builtin provider on the corpus
    brands = build_brand_vectors(specs, run.corpus.comments, run.embeddings, cfg.mode, provider)
    report = reputation_report(brands, model, cfg.top_n)
    skipped = sorted({s.name for s in specs} - {b.name for b in brands})
    out = [atomic_write_json(run.artifact("reputation", "reputation.json"),
                             {"mode": cfg.mode, "top_n": cfg.top_n, "skipped": skipped,
                              "mentions": {b.name: b.n_mentions for b in brands}, "brands": report})]
    for name, ranked in report.items():
        svg = hbar_chart([r["name"] for r in ranked], [r["similarity"] for r in ranked],
                         f"Topic similarity: {name}", [f"{100 * r['similarity']:.1f}%" for r in ranked], vmax=1.0)
        out.append(atomic_write_text(run.artifact("reputation", f"brand_{_slug(name)}.svg"), svg))
    return out


def stage_report(run: Run) -> list[Path]:
    topics = read_json(run.require("topics", "topics.json"))
    label = read_json(run.require("label", "label_summary.json"))
    evaluation = read_json(run.require("evaluate", "evaluation.json"))
    rep_path = run.artifact("reputation", "reputation.json")
    reputation = read_json(rep_path) if rep_path.exists() else None
    n = sum(t["count"] for t in topics["topics"])
    averages = [r for r in evaluation["rows"] if r["seed"] == "AVERAGE"]
    summary = {
        "n_comments": n,
        "n_topics": sum(1 for t in topics["topics"] if t["topic_id"] != OUTLIER_ID),
        "outlier_count": next(t["count"] for t in topics["topics"] if t["topic_id"] == OUTLIER_ID),
        "label_counts": label["class_counts"],
        "topic_sentiment_counts": {s: list(label["topic_sentiments"].values()).count(s)
                                   for s in sorted(set(label["topic_sentiments"].values()))},
        "classifier_averages": averages,
        "reputation_top_topic": None if reputation is None else {
            b: (ranked[0] if ranked else None) for b, ranked in reputation["brands"].items()},
    }
    lines = ["# Pipeline report", "",
             f"- comments: {n}", f"- topics: {summary['n_topics']} (+ outlier bucket of {summary['outlier_count']})",
             f"- labeled comments: {label['class_counts']}", "",
             "## Topics", "", "| topic_id | name | count | top terms |", "|---|---|---|---|"]
    for t in sorted(topics["topics"], key=lambda t: (-t["count"], t["topic_id"])):
        terms = ", ".join(term for term, _ in t["terms"][:5])
        lines.append(f"| {t['topic_id']} | {t['name']} | {t['count']} | {terms} |")
    lines += ["", "## Classifiers (average over seeds)", "",
              "| model | accuracy | precision | recall | f1 | kappa | band |", "|---|---|---|---|---|---|---|"]
    for r in averages:
        lines.append(f"| {r['model']} | {r['accuracy']:.3f} | {r['precision']:.3f} | {r['recall']:.3f} | "
                     f"{r['f1']:.3f} | {r['kappa']:.3f} | {r['band']} |")
    if reputation is not None:
        lines += ["", "## Brand reputation (most similar topics)", ""]
        for b, ranked in reputation["brands"].items():
            tops = "; ".join(f"{r['name']} {100 * r['similarity']:.1f}%" for r in ranked)
            lines.append(f"- **{b}**: {tops}")
        if reputation["skipped"]:
            lines.append(f"- never mentioned: {', '.join(reputation['skipped'])}")
    return [
        atomic_write_json(run.artifact("report", "report.json"), summary),
        atomic_write_text(run.artifact("report", "report.md"), "\n".join(lines) + "\n"),
    ]


STAGE_FUNCS = {
    "ngrams": stage_ngrams,
    "topics": stage_topics,
    "clades": stage_clades,
    "label": stage_label,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "reputation": stage_reputation,
    "report": stage_report,
}


def run_stage(run: Run, stage: str) -> list[Path]:
    start = time.perf_counter()
    paths = STAGE_FUNCS[stage](run)
    run.record(stage, paths, time.perf_counter() - start)
    logger.info("%s: wrote %d artifact(s) in %.2fs", stage, len(paths), time.perf_counter() - start)
    return paths


def run_all(run: Run) -> dict[str, list[Path]]:
    return {stage: run_stage(run, stage) for stage in STAGES}
