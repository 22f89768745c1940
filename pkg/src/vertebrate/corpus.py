"""Comment corpus loading and text preprocessing."""

from __future__ import annotations

import dataclasses
import json
import logging
import string
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable

from .io import atomic_write_jsonl, iter_jsonl

logger = logging.getLogger(__name__)

# Emoticons, Misc Symbols & Pictographs, Transport & Map, Supplemental Symbols
# & Pictographs, variation selectors, zero-width joiner.
EMOJI_RANGES = (
    (0x1F600, 0x1F64F),
    (0x1F300, 0x1F5FF),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0xFE00, 0xFE0F),
    (0x200D, 0x200D),
)


def is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def is_punctuation(ch: str) -> bool:
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


class CorpusError(ValueError):
    """Raised when a corpus file cannot be loaded (strict mode, or fatal errors)."""

    def __init__(self, message: str, issues: list[str] | None = None):
        self.issues = list(issues or [])
        if self.issues:
            message = message + "\n  " + "\n  ".join(self.issues)
        super().__init__(message)


@dataclass(frozen=True)
class Comment:
    id: str
    post_id: str
    timestamp: datetime
    raw_text: str
    clean_text: str = ""
    reactions: int | None = None

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "post_id": self.post_id,
            "timestamp": format_timestamp(self.timestamp),
            "text": self.raw_text,
        }
        if self.reactions is not None:
            rec["reactions"] = self.reactions
        return rec


@dataclass(frozen=True)
class Post:
    id: str
    timestamp: datetime
    text: str

    def to_record(self) -> dict:
        return {"id": self.id, "timestamp": format_timestamp(self.timestamp), "text": self.text}


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = frozenset()
    punctuation: frozenset[str] | None = None  # None: ASCII + Unicode category P*
    strip_emoji: bool = True
    lowercase: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        if self.punctuation is not None:
            object.__setattr__(self, "punctuation", frozenset(self.punctuation))
        for word in self.stopwords:
            if word != word.lower() or any(self._is_punct(ch) for ch in word):
                raise ValueError(f"stopword {word!r} must be lowercase and punctuation-free")

    def _is_punct(self, ch: str) -> bool:
        if self.punctuation is None:
            return is_punctuation(ch)
        return ch in self.punctuation


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 string into an aware UTC datetime (naive input is taken as UTC)."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _comment_from_record(rec: dict) -> Comment:
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "post_id", "timestamp", "text"):
        if key not in rec:
            raise ValueError(f"missing field {key!r}")
    if not isinstance(rec["id"], str) or not isinstance(rec["text"], str):
        raise ValueError("fields 'id' and 'text' must be strings")
    reactions = rec.get("reactions")
    if reactions is not None and (not isinstance(reactions, int) or isinstance(reactions, bool) or reactions < 0):
        raise ValueError("'reactions' must be a non-negative integer")
    try:
        ts = parse_timestamp(rec["timestamp"])
    except ValueError as exc:
        raise ValueError(f"invalid timestamp {rec['timestamp']!r}: {exc}") from None
    return Comment(id=rec["id"], post_id=str(rec["post_id"]), timestamp=ts,
                   raw_text=rec["text"], reactions=reactions)


def _post_from_record(rec: dict) -> Post:
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "timestamp", "text"):
        if key not in rec:
            raise ValueError(f"missing field {key!r}")
    try:
        ts = parse_timestamp(rec["timestamp"])
    except ValueError as exc:
        raise ValueError(f"invalid timestamp {rec['timestamp']!r}: {exc}") from None
    return Post(id=str(rec["id"]), timestamp=ts, text=str(rec["text"]))


def _read_records(path: Path, build) -> tuple[list, list[str]]:
    if not path.exists():
        raise CorpusError(f"file not found: {path}")
    items, issues = [], []
    first_line: dict[str, int] = {}
    for lineno, line in iter_jsonl(path):
        try:
            item = build(json.loads(line))
        except json.JSONDecodeError as exc:
            issues.append(f"{path.name}:{lineno}: malformed JSON ({exc.msg})")
            continue
        except ValueError as exc:
            issues.append(f"{path.name}:{lineno}: {exc}")
            continue
        if item.id in first_line:
            issues.append(f"{path.name}: duplicate id {item.id!r} on lines {first_line[item.id]} and {lineno}")
            continue
        first_line[item.id] = lineno
        items.append(item)
    return items, issues


def read_comments(path: str | Path) -> tuple[list[Comment], list[str]]:
    """Parse a comments file, returning the good records and one message per bad line."""
    return _read_records(Path(path), _comment_from_record)


def read_posts(path: str | Path) -> tuple[list[Post], list[str]]:
    return _read_records(Path(path), _post_from_record)


def load_corpus(comments_path, posts_path=None, strict: bool = False) -> tuple[list[Comment], list[Post]]:
    """Load comments (and optionally posts) from newline-delimited JSON files.

    In lenient mode bad lines are skipped and logged; with ``strict=True`` any bad
    line raises :class:`CorpusError` listing every problem with its line number.
    """
    comments, issues = read_comments(comments_path)
    posts: list[Post] = []
    if posts_path is not None:
        posts, post_issues = read_posts(posts_path)
        issues += post_issues
    if issues:
        if strict:
            raise CorpusError(f"{len(issues)} invalid record(s)", issues)
        logger.warning("skipped %d invalid record(s)", len(issues))
        for msg in issues:
            logger.debug(msg)
    return comments, posts


def write_comments(path, comments: Iterable[Comment]) -> None:
    atomic_write_jsonl(path, (c.to_record() for c in comments))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one token per line, ``#`` comments). ``None`` loads the bundled list."""
    if path is None:
        text = resources.files("vertebrate").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def normalize_text(text: str, config: PreprocessConfig) -> str:
    """Lowercase, drop emoji and punctuation, and collapse whitespace. No stopword removal."""
    if config.lowercase:
        text = text.lower()
    out = []
    for ch in text:
        if (config.strip_emoji and is_emoji(ch)) or config._is_punct(ch):
            out.append(" ")
        else:
            out.append(ch)
    return " ".join("".join(out).split())


def clean(text: str, config: PreprocessConfig) -> str:
    tokens = tokenize(normalize_text(text, config))
    return " ".join(t for t in tokens if t not in config.stopwords)


def preprocess(comment: Comment, config: PreprocessConfig) -> Comment:
    return dataclasses.replace(comment, clean_text=clean(comment.raw_text, config))


def tokenize(clean_text: str) -> list[str]:
    return clean_text.split()


@dataclass
class Corpus:
    """Loaded comments and posts, preprocessed with one config."""

    comments: list[Comment]
    posts: list[Post] = field(default_factory=list)

    @classmethod
    def load(cls, comments_path, posts_path=None, config: PreprocessConfig | None = None,
             strict: bool = False) -> "Corpus":
        comments, posts = load_corpus(comments_path, posts_path, strict=strict)
        config = config or PreprocessConfig()
        return cls([preprocess(c, config) for c in comments], posts)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.comments]

    def tokens(self) -> list[list[str]]:
        return [tokenize(c.clean_text) for c in self.comments]

    def __len__(self) -> int:
        return len(self.comments)
