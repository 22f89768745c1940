"""Synthetic bilingual-style comment corpus with planted topics, clades and brand mentions.

The embeddings place every planted topic around its own center inside a
5-dimensional subspace of a 24-dimensional space, so density clustering after
a 5-component PCA recovers the planted topics and Ward's linkage recovers the
planted clades. Comment ids follow time order and planted topics are numbered
by first appearance, matching how the clustering numbers its topics.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .io import atomic_write_json, atomic_write_jsonl, atomic_write_text

EMBED_DIM = 24
LATENT_DIM = 5
NOISE = 0.12


@dataclass(frozen=True)
class PlantedTopic:
    key: str
    name: str
    sentiment: str  # positive | negative | excluded
    group: str
    size: int
    keywords: tuple[str, ...]
    center: tuple[float, ...]
    brands: tuple[tuple[str, float], ...] = ()  # (alias text, probability of a mention)


def _c(*coords: float) -> tuple[float, ...]:
    return tuple(coords)


PLANTED = (
    PlantedTopic("religion", "religious comments", "positive", "P", 36,
                 ("god", "bless", "pray", "panginoon", "amen", "faith", "dasal", "ingat"),
                 _c(7, 0, 0, 0, 1.6), (("Pfizer", 0.25),)),
    PlantedTopic("gratitude", "gratitude to health workers", "positive", "P", 34,
                 ("thank", "salamat", "frontliners", "heroes", "grateful", "nurses", "saludo", "mabuhay"),
                 _c(7, 0, 0, 0, -1.6), (("Pfizer", 0.3), ("Moderna", 0.25))),
    PlantedTopic("deaths", "vaccine deaths", "negative", "N1", 40,
                 ("namatay", "died", "death", "patay", "autopsy", "biktima", "kaso", "lamay"),
                 _c(0, 7, 0, 0, 1.8), (("AstraZeneca", 0.3),)),
    PlantedTopic("sideeffects", "vaccine side effects", "negative", "N1", 38,
                 ("lagnat", "fever", "sakit", "nilalagnat", "headache", "hilo", "pain", "pagod"),
                 _c(0, 7, 0, 1.8, -0.9), (("Johnson & Johnson", 0.25), ("AstraZeneca", 0.15))),
    PlantedTopic("efficacy", "vaccine efficacy on variants", "negative", "N1", 37,
                 ("variant", "delta", "efficacy", "useless", "epekto", "mutate", "booster", "immunity"),
                 _c(0, 7, 0, -1.8, -0.9), (("Sputnik V", 0.3), ("Sinovac", 0.3))),
    PlantedTopic("doh", "department of health negative comments", "negative", "N2", 40,
                 ("doh", "incompetent", "corrupt", "palpak", "gobyerno", "duque", "failed", "pera"),
                 _c(0, 0, 7, 0, 1.8), (("Sinovac", 0.25),)),
    PlantedTopic("registration", "vaccine registration problems", "negative", "N2", 38,
                 ("register", "registration", "slot", "pila", "online", "appointment", "link", "requirements"),
                 _c(0, 0, 7, 1.8, -0.9), (("Moderna", 0.1),)),
    PlantedTopic("forced", "forced vaccination", "negative", "N2", 37,
                 ("pilit", "force", "mandatory", "ayaw", "choice", "rights", "pilitin", "karapatan"),
                 _c(0, 0, 7, -1.8, -0.9)),
    PlantedTopic("general", "vaccination", "excluded", "X", 150,
                 ("bakuna", "vaccine", "vaccinated", "dose", "schedule", "bakunado", "shot", "jab"),
                 _c(0, 0, 0, 7, 0), (("Pfizer", 0.04), ("Sinovac", 0.04))),
)
N_OUTLIERS = 40

COMMON = ("covid", "vaccine", "bakuna", "tao", "sana", "wala", "people", "ngayon", "talaga", "dito")
STOP = ("the", "ang", "sa", "po", "is", "mga", "and", "na", "to", "ng")
FILLER = ("okay", "hmm", "grabe", "sige", "wow", "haha", "ewan", "bahala", "basta", "kasi")
EMOJI = ("\U0001F637", "\U0001F64F", "\U0001F622", "\U0001F621", "\U0001F489", "❤️", "\U0001F602")
PUNCT = ("!", "?", "...", ",", ".", "!!")

BRANDS = [
    {"name": "Pfizer", "aliases": ["pfizer"]},
    {"name": "Moderna", "aliases": ["moderna"]},
    {"name": "AstraZeneca", "aliases": ["astrazeneca", "astra"]},
    {"name": "Johnson & Johnson", "aliases": ["johnson & johnson", "janssen"]},
    {"name": "Sputnik V", "aliases": ["sputnik v", "sputnik"]},
    {"name": "Sinovac", "aliases": ["sinovac"]},
    {"name": "Sinopharm", "aliases": ["sinopharm"]},
]

START = datetime(2021, 4, 20, 8, 0, tzinfo=timezone.utc)
END = datetime(2021, 9, 9, 20, 0, tzinfo=timezone.utc)
N_POSTS = 12


def _comment_text(rng: np.random.Generator, topic: PlantedTopic | None) -> str:
    words: list[str] = []
    n = int(rng.integers(6, 13))
    for _ in range(n):
        u = rng.random()
        if topic is not None and u < 0.55:
            words.append(str(rng.choice(topic.keywords)))
        elif u < 0.7:
            words.append(str(rng.choice(COMMON)))
        elif u < 0.88:
            words.append(str(rng.choice(STOP)))
        else:
            words.append(str(rng.choice(FILLER)))
    if topic is not None:
        for alias, p in topic.brands:
            if rng.random() < p:
                words.insert(int(rng.integers(0, len(words) + 1)), alias)
    if rng.random() < 0.3:
        words[0] = words[0].upper()
    text = " ".join(words)
    if rng.random() < 0.5:
        text += str(rng.choice(PUNCT))
    if rng.random() < 0.35:
        text += " " + str(rng.choice(EMOJI)) * int(rng.integers(1, 3))
    return text


def generate(seed: int = 2021) -> dict:
    """Build the synthetic corpus in memory (records, embeddings, truth and companion configs)."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(EMBED_DIM, LATENT_DIM)))
    posts = []
    span = (END - START).total_seconds()
    for k in range(N_POSTS):
        ts = START + timedelta(seconds=span * k / (N_POSTS - 1) * 0.97)
        posts.append({"id": f"p{k + 1:02d}", "timestamp": ts, "text": f"DOH announcement #{k + 1} #RESBAKUNA"})

    items = []
    for topic in PLANTED:
        favored = rng.choice(N_POSTS, size=3, replace=False)
        for _ in range(topic.size):
            post = posts[int(rng.choice(favored)) if rng.random() < 0.7 else int(rng.integers(N_POSTS))]
            items.append((topic, post))
    for _ in range(N_OUTLIERS):
        items.append((None, posts[int(rng.integers(N_POSTS))]))

    records = []
    for topic, post in items:
        ts = post["timestamp"] + timedelta(minutes=int(rng.integers(1, 60 * 72)))
        ts = min(ts, END)
        if topic is None:
            direction = rng.normal(size=LATENT_DIM)
            latent = 14.0 * direction / np.linalg.norm(direction)
        else:
            latent = np.asarray(topic.center, dtype=float)
        vec = basis @ latent + rng.normal(scale=NOISE, size=EMBED_DIM)
        records.append({"topic": topic, "post": post, "timestamp": ts, "text": _comment_text(rng, topic),
                        "vector": vec, "reactions": int(rng.integers(0, 500))})
    records.sort(key=lambda r: r["timestamp"])

    topic_ids: dict[str, int] = {}
    for r in records:
        t = r["topic"]
        if t is not None and t.key not in topic_ids:
            topic_ids[t.key] = len(topic_ids)

    comments, embeddings, truth = [], [], {}
    for i, r in enumerate(records, start=1):
        cid = f"c{i:04d}"
        t = r["topic"]
        comments.append({"id": cid, "post_id": r["post"]["id"], "timestamp": _iso(r["timestamp"]),
                         "text": r["text"], "reactions": r["reactions"]})
        embeddings.append({"id": cid, "vector": [round(float(x), 6) for x in r["vector"]]})
        truth[cid] = {
            "planted_topic": None if t is None else t.key,
            "topic_id": -1 if t is None else topic_ids[t.key],
            "sentiment": "none" if t is None else t.sentiment,
        }

    # Clades are numbered by their smallest topic id.
    groups: dict[str, list[int]] = {}
    group_sentiment: dict[str, str] = {}
    for t in PLANTED:
        if t.sentiment == "excluded":
            continue
        groups.setdefault(t.group, []).append(topic_ids[t.key])
        group_sentiment[t.group] = t.sentiment
    ordered = sorted(groups, key=lambda g: min(groups[g]))
    clade_rows = [(i, group_sentiment[g]) for i, g in enumerate(ordered)]
    excluded = sorted(topic_ids[t.key] for t in PLANTED if t.sentiment == "excluded")

    return {
        "posts": [{**p, "timestamp": _iso(p["timestamp"])} for p in posts],
        "comments": comments,
        "embeddings": embeddings,
        "truth": {"comments": truth, "topics": {t.key: {"topic_id": topic_ids[t.key], "name": t.name,
                                                        "sentiment": t.sentiment, "group": t.group}
                                                for t in PLANTED},
                  "clades": [{"clade_id": i, "topics": sorted(groups[g]), "sentiment": group_sentiment[g]}
                             for i, g in enumerate(ordered)]},
        "topic_names": sorted((topic_ids[t.key], t.name) for t in PLANTED),
        "clade_sentiments": clade_rows,
        "excluded_topics": excluded,
        "n_clades": len(groups),
    }


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write(out_dir: str | Path, seed: int = 2021) -> Path:
    """Write the corpus files plus a ready-to-run ``config.json`` into ``out_dir``."""
    out = Path(out_dir)
    data = generate(seed)
    atomic_write_jsonl(out / "comments.jsonl", data["comments"])
    atomic_write_jsonl(out / "posts.jsonl", data["posts"])
    atomic_write_jsonl(out / "embeddings.jsonl", data["embeddings"])
    atomic_write_json(out / "truth.json", data["truth"])
    atomic_write_text(out / "brands.json", json.dumps(BRANDS, indent=2) + "\n")
    atomic_write_text(out / "topic_names.csv", _csv(["topic_id", "name"], data["topic_names"]))
    atomic_write_text(out / "clade_sentiments.csv", _csv(["clade_id", "sentiment"], data["clade_sentiments"]))
    config = {
        "inputs": {
            "comments": "comments.jsonl",
            "posts": "posts.jsonl",
            "embeddings": "embeddings.jsonl",
            "brands": "brands.json",
            "topic_names": "topic_names.csv",
            "clade_sentiments": "clade_sentiments.csv",
        },
        "embedding": {"provider": "file"},
        "topics": {"eps": 1.0, "min_members": 5, "pca_dim": 5, "top_terms": 10, "temporal_bin": "week"},
        "clades": {"n_clades": data["n_clades"], "exclusions": data["excluded_topics"]},
        "out_dir": "out",
    }
    atomic_write_json(out / "config.json", config)
    return out
