"""Tokenization and normalization of motivation statements.

The model pipeline is tokenize -> lowercase -> digit/length filter ->
stopword filter.  Dictionary extraction (see :mod:`motivmine.lexicon`)
instead consumes :func:`dictionary_tokens`, the stream *before* stopword
removal, because Dutch stopword lists overlap heavily with the
function-word categories of LIWC-style dictionaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DataError

# Tokens are maximal runs of Unicode letters; a hyphen or apostrophe is
# kept only when it sits between two letter runs.
_WORD_RE = re.compile(r"[^\W\d_]+(?:['’\-][^\W\d_]+)*")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+")
_DIGIT_RE = re.compile(r"\d")

BUNDLED_STOPWORDS = "stopwords_nl.txt"


@dataclass(frozen=True)
class StopwordList:
    """Lowercase stopwords plus the name of wherever they came from."""

    words: frozenset[str]
    source_name: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        for w in self.words:
            if not w or w != w.lower():
                raise DataError(f"stopword entries must be nonempty lowercase: {w!r}")

    def __contains__(self, token: str) -> bool:
        return token in self.words

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class TokenizedDoc:
    """A normalized document: stopword-free lowercase tokens plus the raw
    sentence count (floored at 1) used for per-sentence statistics."""

    record_id: str
    tokens: tuple[str, ...]
    raw_sentence_count: int


def tokenize(text: str) -> tuple[list[str], int]:
    """Split raw text into word tokens and count its sentences.

    Sentences are the segments delimited by '.', '!' or '?' that contain
    any non-whitespace; nonempty text counts as at least one sentence.
    Returns ``([], 0)`` for the empty string.
    """
    tokens = _WORD_RE.findall(text)
    if not text:
        return tokens, 0
    n_sentences = sum(1 for seg in _SENTENCE_SPLIT_RE.split(text) if seg.strip())
    return tokens, max(1, n_sentences)


def normalize(raw_tokens: list[str], stopwords: StopwordList) -> list[str]:
    """Lowercase tokens, then drop digit-bearing tokens, tokens shorter
    than two characters, and stopwords.  Order is preserved."""
    out = []
    for token in raw_tokens:
        token = token.lower()
        if len(token) < 2 or _DIGIT_RE.search(token) or token in stopwords:
            continue
        out.append(token)
    return out


def dictionary_tokens(raw_tokens: list[str]) -> list[str]:
    """Token stream for dictionary matching: lowercased, digit-bearing
    tokens dropped, stopwords and short tokens retained."""
    return [t.lower() for t in raw_tokens if not _DIGIT_RE.search(t)]


def prepare(record_id: str, text: str, stopwords: StopwordList) -> tuple[TokenizedDoc, list[str]]:
    """Run the full pipeline on one text.

    Returns the normalized :class:`TokenizedDoc` together with the
    pre-stopword stream consumed by dictionary extraction.
    """
    raw, n_sentences = tokenize(text)
    doc = TokenizedDoc(
        record_id=record_id,
        tokens=tuple(normalize(raw, stopwords)),
        raw_sentence_count=max(1, n_sentences),
    )
    return doc, dictionary_tokens(raw)


def load_stopwords(path: str | Path) -> StopwordList:
    """Read a stopword file: one word per line, '#' comments, UTF-8."""
    return _parse_stopwords(Path(path).read_text(encoding="utf-8"), str(path))


def bundled_stopwords() -> StopwordList:
    """The Dutch stopword list shipped with the package."""
    text = resources.files("motivmine.data").joinpath(BUNDLED_STOPWORDS).read_text("utf-8")
    return _parse_stopwords(text, BUNDLED_STOPWORDS)


def _parse_stopwords(text: str, source_name: str) -> StopwordList:
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return StopwordList(words=frozenset(words), source_name=source_name)
