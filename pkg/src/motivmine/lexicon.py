"""LIWC2007-format dictionaries and dictionary-based text features.

The ``.dic`` grammar: a ``%`` line, category declarations ``ID<TAB>NAME``,
a second ``%`` line, then entry lines ``PATTERN<TAB>ID(<TAB>ID)*`` where a
trailing ``*`` on the pattern declares a prefix match.  Blank lines are
ignored.  Feature values follow the LIWC convention: percentages of the
document word count, plus the general statistics WC, WPS, Sixltr and Dic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

BUNDLED_DIC = "mini_liwc_nl.dic"

GENERAL_FEATURES = ("WC", "WPS", "Sixltr", "Dic")


@dataclass(frozen=True)
class Lexicon:
    """Parsed dictionary: declared categories plus exact and prefix entries."""

    categories: tuple[tuple[int, str], ...]
    exact_entries: dict[str, frozenset[int]]
    prefix_entries: dict[str, frozenset[int]]
    source_name: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        ids = [cid for cid, _ in self.categories]
        if len(ids) != len(set(ids)):
            raise DataError("duplicate category ids in lexicon")
        declared = set(ids)
        for table in (self.exact_entries, self.prefix_entries):
            for pattern, cats in table.items():
                if not pattern:
                    raise DataError("empty pattern in lexicon")
                if not cats <= declared:
                    raise DataError(f"entry {pattern!r} references undeclared categories")

    @property
    def category_names(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.categories)

    def categories_for(self, token: str) -> set[int]:
        """Union of exact and prefix matches for one lowercase token."""
        cats = set(self.exact_entries.get(token, ()))
        for end in range(1, len(token) + 1):
            hit = self.prefix_entries.get(token[:end])
            if hit is not None:
                cats |= hit
        return cats


@dataclass(frozen=True)
class LiwcFeatures:
    """Word count, sentence and long-word statistics, and category percentages."""

    wc: int
    wps: float
    sixltr: float
    dic: float
    category_percent: dict[str, float]

    def to_vector(self, lexicon: Lexicon) -> np.ndarray:
        values = [float(self.wc), self.wps, self.sixltr, self.dic]
        values += [self.category_percent[name] for name in lexicon.category_names]
        return np.array(values, dtype=np.float64)


def feature_names(lexicon: Lexicon) -> tuple[str, ...]:
    """Column order of :meth:`LiwcFeatures.to_vector`."""
    return GENERAL_FEATURES + lexicon.category_names


def parse_dic(text: str, source_name: str = "custom") -> Lexicon:
    """Parse LIWC ``.dic`` text; errors carry 1-based line numbers."""
    categories: list[tuple[int, str]] = []
    declared: set[int] = set()
    exact: dict[str, set[int]] = {}
    prefixes: dict[str, set[int]] = {}
    section = 0  # 0 = before first %, 1 = categories, 2 = entries
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        if line == "%":
            section += 1
            if section > 2:
                raise DataError(f"line {lineno}: unexpected extra '%' delimiter")
            continue
        if section == 0:
            raise DataError(f"line {lineno}: expected '%' delimiter before category section")
        fields = [f for f in line.split("\t") if f.strip()]
        if section == 1:
            if len(fields) != 2:
                raise DataError(f"line {lineno}: category lines must be 'ID<TAB>NAME'")
            try:
                cid = int(fields[0])
            except ValueError as exc:
                raise DataError(f"line {lineno}: category id {fields[0]!r} is not an integer") from exc
            if cid in declared:
                raise DataError(f"line {lineno}: duplicate category id {cid}")
            categories.append((cid, fields[1].strip()))
            declared.add(cid)
        else:
            if len(fields) < 2:
                raise DataError(f"line {lineno}: entry lines must be 'PATTERN<TAB>ID...'")
            pattern = fields[0].strip().lower()
            try:
                ids = {int(f) for f in fields[1:]}
            except ValueError as exc:
                raise DataError(f"line {lineno}: non-integer category id on entry {pattern!r}") from exc
            missing = ids - declared
            if missing:
                raise DataError(
                    f"line {lineno}: entry {pattern!r} references undeclared "
                    f"category {sorted(missing)}"
                )
            if pattern.endswith("*"):
                pattern = pattern[:-1]
                if not pattern:
                    raise DataError(f"line {lineno}: bare '*' is not a valid pattern")
                prefixes.setdefault(pattern, set()).update(ids)
            else:
                if not pattern:
                    raise DataError(f"line {lineno}: empty pattern")
                exact.setdefault(pattern, set()).update(ids)
    if section < 2:
        raise DataError("missing '%' delimiters: expected two")
    return Lexicon(
        categories=tuple(categories),
        exact_entries={w: frozenset(c) for w, c in exact.items()},
        prefix_entries={w: frozenset(c) for w, c in prefixes.items()},
        source_name=source_name,
    )


def serialize_dic(lexicon: Lexicon) -> str:
    """Render a lexicon back to ``.dic`` text; parse(serialize(x)) == x."""
    lines = ["%"]
    lines += [f"{cid}\t{name}" for cid, name in lexicon.categories]
    lines.append("%")
    entries = [(w, cats) for w, cats in lexicon.exact_entries.items()]
    entries += [(w + "*", cats) for w, cats in lexicon.prefix_entries.items()]
    for pattern, cats in sorted(entries):
        lines.append("\t".join([pattern] + [str(c) for c in sorted(cats)]))
    return "\n".join(lines) + "\n"


def load_dic(path: str | Path) -> Lexicon:
    return parse_dic(Path(path).read_text(encoding="utf-8"), source_name=str(path))


def bundled_lexicon() -> Lexicon:
    """The miniature open test dictionary shipped with the package.

    The real Dutch LIWC2007 dictionary is licensed and must be supplied
    by the user.
    """
    text = resources.files("motivmine.data").joinpath(BUNDLED_DIC).read_text("utf-8")
    return parse_dic(text, source_name=BUNDLED_DIC)


def extract(tokens: Sequence[str], sentence_count: int, lexicon: Lexicon) -> LiwcFeatures:
    """Compute dictionary features for one document.

    ``tokens`` is the pre-stopword lowercase stream; a token counts toward
    every category it matches.  An empty document yields all zeros.
    """
    wc = len(tokens)
    names_by_id = dict(lexicon.categories)
    if wc == 0:
        return LiwcFeatures(
            wc=0, wps=0.0, sixltr=0.0, dic=0.0,
            category_percent={name: 0.0 for name in lexicon.category_names},
        )
    if sentence_count < 1:
        raise ValueError("sentence_count must be >= 1 for nonempty token lists")
    cat_counts: Counter[int] = Counter()
    n_matched = 0
    n_long = 0
    for token in tokens:
        if len(token) > 6:
            n_long += 1
        cats = lexicon.categories_for(token)
        if cats:
            n_matched += 1
            cat_counts.update(cats)
    scale = 100.0 / wc
    return LiwcFeatures(
        wc=wc,
        wps=wc / sentence_count,
        sixltr=scale * n_long,
        dic=scale * n_matched,
        category_percent={
            names_by_id[cid]: scale * cat_counts.get(cid, 0) for cid, _ in lexicon.categories
        },
    )


def extract_many(
    token_streams: Iterable[Sequence[str]],
    sentence_counts: Iterable[int],
    lexicon: Lexicon,
) -> np.ndarray:
    """Stack :func:`extract` vectors for a corpus, row per document."""
    rows = [
        extract(tokens, n, lexicon).to_vector(lexicon)
        for tokens, n in zip(token_streams, sentence_counts)
    ]
    if not rows:
        return np.zeros((0, len(feature_names(lexicon))))
    return np.vstack(rows)
