"""Normalization, citation/date masking and tokenization of Portuguese legal text."""

from __future__ import annotations

import re
import unicodedata
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

_LATIN = (
    r"A-Za-z\u00aa\u00ba\u00c0-\u00d6\u00d8-\u00f6\u00f8-\u024f"
    r"\u1e00-\u1eff\u2c60-\u2c7f\ua720-\ua7ff\uab30-\uab6f"
)
_MARKS = r"\u0300-\u036f\u1ab0-\u1aff\u1dc0-\u1dff\u20d0-\u20ff\ufe20-\ufe2f"

_LATIN_MARKS_RE = re.compile(f"(?<=[{_LATIN}])[{_MARKS}]+")
_ANY_MARK_RE = re.compile(f"[{_MARKS}]")
_LATIN_CHAR_RE = re.compile(f"[{_LATIN}]")
_TOKEN_RE = re.compile(r"[^\W_]+")
_ORDINALS = str.maketrans({"\u00aa": "a", "\u00ba": "o"})


def _build_fold_table() -> dict[int, str]:
    # one-to-one map from precomposed Latin letters to their base letter
    table = {0xAA: "a", 0xBA: "o"}
    for lo, hi in ((0xC0, 0x24F), (0x1E00, 0x1EFF)):
        for cp in range(lo, hi + 1):
            decomposed = unicodedata.normalize("NFD", chr(cp))
            base = "".join(c for c in decomposed if not unicodedata.combining(c))
            if len(base) == 1 and base != chr(cp):
                table[cp] = base
    return table


_FOLD_TABLE = _build_fold_table()

MONTHS_PT = (
    "janeiro", "fevereiro", "marco", "abril", "maio", "junho",
    "julho", "agosto", "setembro", "outubro", "novembro", "dezembro",
)

DEFAULT_CITATION_PATTERNS = (
    r"\bsumulas?\s+vinculantes?(?:\s*(?:n(?:o|\.|°|umero)?\.?)?\s*\d+)?",
    r"\bSV\s*-?\s*(?:n(?:o|\.|°)?\.?\s*)?\d+\b",
)

DEFAULT_DATE_PATTERNS = (
    r"\b\d{1,2}\s*/\s*\d{1,2}\s*/\s*\d{2,4}\b",
    r"\b\d{1,2}-\d{1,2}-\d{2,4}\b",
    r"\b\d{4}-\d{2}-\d{2}\b",
    r"\b\d{1,2}\s*[o°]?\s+de\s+(?:" + "|".join(MONTHS_PT) + r")\s+de\s+\d{4}\b",
)


def strip_accents(text: str) -> str:
    """Remove diacritics from Latin letters, leaving every other character alone."""
    s = unicodedata.normalize("NFD", text)
    s = _LATIN_MARKS_RE.sub("", s)
    return unicodedata.normalize("NFC", s.translate(_ORDINALS))


def normalize_text(text: str) -> str:
    """Lowercase and accent-fold ``text``: ``"Ação"`` becomes ``"acao"``."""
    return strip_accents(text.lower())


def fold_pattern(pattern: str) -> str:
    # only touches accented letters, so regex escapes keep their case
    return pattern.translate(_FOLD_TABLE)


def _fold_with_offsets(text: str) -> tuple[str, list[int] | None]:
    """Accent-fold for matching, keeping a map back to ``text`` positions.

    Offsets are ``None`` when folding is length preserving (no combining
    marks in the input), i.e. positions coincide.
    """
    if not _ANY_MARK_RE.search(text):
        return text.translate(_FOLD_TABLE), None
    pieces: list[str] = []
    offsets: list[int] = []
    prev_latin = False
    for i, c in enumerate(text):
        if unicodedata.combining(c) and prev_latin:
            continue
        folded = c.translate(_FOLD_TABLE)
        pieces.append(folded)
        offsets.append(i)
        prev_latin = bool(_LATIN_CHAR_RE.match(folded))
    offsets.append(len(text))
    return "".join(pieces), offsets


@dataclass(frozen=True)
class MaskingRules:
    citation_patterns: tuple[str, ...] = DEFAULT_CITATION_PATTERNS
    date_patterns: tuple[str, ...] = DEFAULT_DATE_PATTERNS

    def __post_init__(self):
        # fail at construction, not at first use
        _ = self.compiled

    @cached_property
    def compiled(self) -> tuple[re.Pattern, ...]:
        pats = []
        for p in (*self.citation_patterns, *self.date_patterns):
            try:
                pats.append(re.compile(fold_pattern(p), re.IGNORECASE))
            except re.error as exc:
                raise ValueError(f"invalid masking pattern {p!r}: {exc}") from exc
        return tuple(pats)

    def with_aliases(self, aliases: Iterable[str]) -> "MaskingRules":
        aliases = tuple(aliases)
        if not aliases:
            return self
        return MaskingRules(self.citation_patterns + aliases, self.date_patterns)

    def find(self, text: str) -> list[tuple[int, int]]:
        """Return merged ``(start, end)`` spans in ``text`` matched by any rule."""
        folded, offsets = _fold_with_offsets(text)
        spans = []
        for pat in self.compiled:
            for m in pat.finditer(folded):
                if m.end() > m.start():
                    spans.append((m.start(), m.end()))
        if not spans:
            return []
        spans.sort()
        merged = [list(spans[0])]
        for s, e in spans[1:]:
            if s <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], e)
            else:
                merged.append([s, e])
        if offsets is None:
            return [(s, e) for s, e in merged]
        return [(offsets[s], offsets[e]) for s, e in merged]


def mask_citations_and_dates(text: str, rules: MaskingRules) -> str:
    """Delete every citation and date match from ``text``.

    Deletion can glue fragments into a fresh match, so the pass repeats
    until nothing matches; the result is therefore idempotent.
    """
    while True:
        spans = rules.find(text)
        if not spans:
            return text
        out = []
        pos = 0
        for s, e in spans:
            out.append(text[pos:s])
            pos = e
        out.append(text[pos:])
        text = "".join(out)


def tokenize(normalized: str) -> list[str]:
    return _TOKEN_RE.findall(normalized)


def preprocess(text: str, stopwords: frozenset[str] | set[str], rules: MaskingRules) -> list[str]:
    """Mask, normalize, tokenize and drop stopwords."""
    tokens = tokenize(normalize_text(mask_citations_and_dates(text, rules)))
    return [t for t in tokens if t not in stopwords]


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one token per line); the shipped list when ``path`` is None."""
    if path is None:
        raw = resources.files("simcase").joinpath("data/stopwords_pt.txt").read_text("utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(normalize_text(line))
    return frozenset(words)


@dataclass(frozen=True)
class TextPreprocessor:
    """Bundled preprocessing settings, picklable for worker pools."""

    stopwords: frozenset[str] = field(default_factory=load_stopwords)
    rules: MaskingRules = field(default_factory=MaskingRules)

    def __call__(self, text: str) -> list[str]:
        return preprocess(text, self.stopwords, self.rules)

    def many(self, texts: Sequence[str], workers: int = 1) -> list[list[str]]:
        # order-preserving map, so output never depends on the worker count
        if workers <= 1 or len(texts) < 2 * workers:
            return [self(t) for t in texts]
        chunk = max(1, len(texts) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self, texts, chunksize=chunk))
