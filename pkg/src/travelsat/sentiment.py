"""Review-text sentiment in [-1, 1].

The default scorer is a lexicon lookup with a short negation window. A
client for a remote scoring service is kept behind the same interface;
its replies are cached on disk so repeated runs never hit the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .data import Dataset

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "SENTIMENT_ENDPOINT"

DEFAULT_NEGATORS = frozenset({
    "not", "no", "never", "none", "nothing", "nobody", "nowhere", "neither", "nor",
    "without", "cannot", "hardly", "barely", "scarcely", "dont", "don", "doesn",
    "didn", "isn", "wasn", "weren", "aren", "wouldn", "couldn", "shouldn", "hasn",
    "haven", "hadn", "ain", "cant",
})

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(text)]


def clamp(value: float) -> float:
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class SentimentScore:
    value: float
    n_tokens: int
    n_hits: int


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, float]
    negators: frozenset[str] = DEFAULT_NEGATORS
    negation_window: int = 3

    def __post_init__(self):
        both = set(self.entries) & set(self.negators)
        if both:
            raise ValueError(f"tokens both polar and negators: {sorted(both)[:5]}")
        bad = [t for t, v in self.entries.items() if not -1.0 <= v <= 1.0]
        if bad:
            raise ValueError(f"polarity outside [-1, 1] for {bad[:5]}")
        if self.negation_window < 0:
            raise ValueError("negation_window must be non-negative")


def parse_lexicon(lines: Iterable[str], **kwargs) -> Lexicon:
    entries: dict[str, float] = {}
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            token, polarity = line.split("\t")
            entries[token.strip().lower()] = float(polarity)
        except ValueError:
            raise ValueError(f"lexicon line {i}: expected token<TAB>polarity, got {line!r}") from None
    return Lexicon(entries, **kwargs)


def load_lexicon(path: "str | Path | None" = None, **kwargs) -> Lexicon:
    """Load a lexicon file; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("travelsat").joinpath("resources", "lexicon.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_lexicon(text.splitlines(), **kwargs)


def score(text: str, lex: Lexicon) -> SentimentScore:
    tokens = tokenize(text)
    total = 0.0
    hits = 0
    for i, tok in enumerate(tokens):
        polarity = lex.entries.get(tok)
        if polarity is None:
            continue
        window = tokens[max(0, i - lex.negation_window):i]
        if any(w in lex.negators for w in window):
            polarity = -polarity
        total += polarity
        hits += 1
    return SentimentScore(clamp(total / max(1, hits)), len(tokens), hits)


class RemoteSentimentError(RuntimeError):
    """The service could not be reached and the text is not cached."""


class ProtocolError(RuntimeError):
    """The service replied with something other than ``{"score": number}``."""


def _http_post(endpoint: str, payload: bytes, timeout: float) -> bytes:
    req = urllib.request.Request(
        endpoint, data=payload, method="POST",
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return resp.read()


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RemoteScorer:
    """Client for a JSON sentiment service with an append-only disk cache.

    ``post`` can be swapped for a fake transport in tests; it takes
    ``(endpoint, body, timeout)`` and returns the raw reply bytes.
    """

    endpoint: str | None
    cache_path: Path
    timeout: float = 10.0
    post: Callable[[str, bytes, float], bytes] = _http_post
    _cache: dict[str, float] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        self.cache_path = Path(self.cache_path)
        if self.cache_path.exists():
            with self.cache_path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                        self._cache[obj["hash"]] = float(obj["score"])
                    except (ValueError, KeyError, TypeError):
                        # a torn final line from an interrupted write
                        logger.warning("skipping unreadable cache line in %s", self.cache_path)

    def __call__(self, text: str) -> SentimentScore:
        n_tokens = len(tokenize(text))
        if n_tokens == 0:
            return SentimentScore(0.0, 0, 0)
        key = text_hash(text)
        cached = self._cache.get(key)
        if cached is not None:
            return SentimentScore(cached, n_tokens, n_tokens)
        if not self.endpoint:
            raise RemoteSentimentError("no sentiment endpoint configured and text not cached")

        body = json.dumps({"text": text}).encode("utf-8")
        try:
            raw = self.post(self.endpoint, body, self.timeout)
        except (urllib.error.URLError, OSError) as exc:
            raise RemoteSentimentError(f"sentiment service unreachable: {exc}") from exc
        try:
            value = json.loads(raw)["score"]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"score is {type(value).__name__}")
            value = float(value)
            if value != value:
                raise ValueError("score is NaN")
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed sentiment reply {raw[:80]!r}: {exc}") from exc

        clamped = clamp(value)
        if clamped != value:
            logger.warning("sentiment score %r outside [-1, 1], clamped to %r", value, clamped)
        with self._lock:
            self._cache[key] = clamped
            self.cache_path.parent.mkdir(parents=True, exist_ok=True)
            with self.cache_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"hash": key, "score": clamped}) + "\n")
        return SentimentScore(clamped, n_tokens, n_tokens)


def score_remote(text: str, endpoint: str | None, cache: "str | Path") -> SentimentScore:
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    return RemoteScorer(endpoint, Path(cache))(text)


class AnnotationError(RuntimeError):
    pass


def annotate(d: Dataset, scorer: Callable[[str], "SentimentScore | float"], *,
             force: bool = False) -> Dataset:
    """Return a copy of ``d`` with every record's sentiment filled in."""
    records = []
    for i, rec in enumerate(d.records):
        if rec.sentiment is not None and not force:
            records.append(rec)
            continue
        try:
            result = scorer(rec.text)
        except Exception as exc:
            raise AnnotationError(f"record {i} (line {rec.line_no}): {exc}") from exc
        value = result.value if isinstance(result, SentimentScore) else float(result)
        records.append(replace(rec, sentiment=value))
    return replace(d, records=tuple(records))


def lexicon_scorer(lex: Lexicon) -> Callable[[str], SentimentScore]:
    return lambda text: score(text, lex)
