"""Pipeline configuration: one JSON file, dotted ``--set`` overrides."""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

DEFAULT_SEEDS = [15, 27, 32, 45, 51]


class ConfigError(ValueError):
    pass


@dataclass
class InputsConfig:
    comments: str | None = None
    posts: str | None = None
    stopwords: str | None = None  # None: bundled bilingual list
    embeddings: str | None = None
    brands: str | None = None
    topic_names: str | None = None
    clade_sentiments: str | None = None
    topic_overrides: str | None = None


@dataclass
class PreprocessSection:
    strip_emoji: bool = True
    lowercase: bool = True
    remove_stopwords: bool = True


@dataclass
class NgramsConfig:
    ns: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    top_k: int = 10
    source: str = "raw"  # raw: normalized text with stopwords kept; clean: stopwords removed


@dataclass
class EmbeddingConfig:
    provider: str = "builtin"  # file | http | builtin
    url: str | None = None
    dim: int = 32
    batch_size: int = 64
    timeout: float = 30.0


@dataclass
class TopicsConfig:
    eps: float = 0.5
    min_members: int = 5
    pca_dim: int | None = 5
    top_terms: int = 10
    temporal_bin: str = "day"
    temporal_topics: list[int] | None = None  # None: the five largest topics


@dataclass
class CladesConfig:
    threshold: float | None = None
    threshold_ratio: float = 0.7
    n_clades: int | None = None
    exclusions: list[int] = field(default_factory=list)


DEFAULT_MODELS = {
    "nb": {"alpha": 1.0},
    "knn": {"k": [10, 20]},
    "svm": {"epochs": 20, "lam": 1e-3},
    "gbt_levelwise": {"rounds": 100, "learning_rate": 0.1, "max_depth": 6},
    "gbt_leafwise": {"rounds": 100, "learning_rate": 0.1, "max_leaves": 31},
}


@dataclass
class ClassifyConfig:
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    train_fraction: float = 0.8
    oversample: bool = True
    split_first: bool = False
    average: str = "weighted"
    # Per-kind hyperparameters merged over DEFAULT_MODELS; a null entry drops that model.
    models: dict[str, dict | None] = field(default_factory=dict)

    def __post_init__(self):
        merged = copy.deepcopy(DEFAULT_MODELS)
        for kind, params in self.models.items():
            if params is None:
                merged.pop(kind, None)
            elif kind not in DEFAULT_MODELS:
                raise ConfigError(f"unknown model kind {kind!r}")
            else:
                merged[kind] = {**merged[kind], **params}
        self.models = merged


@dataclass
class ReputationConfig:
    mode: str = "mention-centroid"
    top_n: int = 5


@dataclass
class PipelineConfig:
    inputs: InputsConfig = field(default_factory=InputsConfig)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    ngrams: NgramsConfig = field(default_factory=NgramsConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    topics: TopicsConfig = field(default_factory=TopicsConfig)
    clades: CladesConfig = field(default_factory=CladesConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    reputation: ReputationConfig = field(default_factory=ReputationConfig)
    out_dir: str = "out"
    base_dir: str = "."

    def path(self, name: str) -> Path | None:
        value = getattr(self.inputs, name)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def validate(self) -> None:
        if not self.classify.seeds:
            raise ConfigError("classify.seeds must not be empty")
        if self.inputs.comments is None:
            raise ConfigError("inputs.comments is required")
        if self.clades.threshold is not None and self.clades.n_clades is not None:
            raise ConfigError("set at most one of clades.threshold and clades.n_clades")
        for name in dataclasses.fields(self.inputs):
            p = self.path(name.name)
            if p is not None and not p.exists():
                raise ConfigError(f"inputs.{name.name}: file not found: {p}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        kwargs = {}
        hints = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in d.items():
            if key not in hints or key == "base_dir":
                raise ConfigError(f"unknown config key {key!r}")
            sub = hints[key].default_factory if hints[key].default_factory is not dataclasses.MISSING else None
            if sub is not None and dataclasses.is_dataclass(sub):
                kwargs[key] = _build_section(sub, value, key)
            else:
                kwargs[key] = value
        return cls(**kwargs, base_dir=str(base_dir))


def _build_section(cls, value: Any, prefix: str):
    if not isinstance(value, dict):
        raise ConfigError(f"{prefix} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(value) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {prefix}: {unknown}")
    return cls(**value)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` assignments; values parse as JSON when they can."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p!r} is not a section")
        node[parts[-1]] = _parse_value(value)
    return raw


def bundled_config_path() -> Path:
    return Path(str(resources.files("vertebrate").joinpath("data/synthetic/config.json")))


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> PipelineConfig:
    """Read a config file (``None`` selects the bundled synthetic demo) and apply overrides."""
    path = bundled_config_path() if path is None else Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    raw = apply_overrides(raw, overrides or [])
    try:
        return PipelineConfig.from_dict(raw, base_dir=path.resolve().parent)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
