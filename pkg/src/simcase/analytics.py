"""Time series, spline overlays, word correlations and metadata breakdowns."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import METADATA_FIELDS, Document
from .textprep import normalize_text

OTHER = "other"
_WS_RE = re.compile(r"\s+")


def parse_bin_width(width: str | int) -> int:
    """Bin width in months from ``"6M"``, ``"1Y"``, ``"semester"``, ``"year"`` or an int."""
    if isinstance(width, int):
        months = width
    else:
        w = width.strip().lower()
        named = {"year": 12, "semester": 6, "quarter": 3, "month": 1}
        if w in named:
            months = named[w]
        else:
            m = re.fullmatch(r"(\d+)\s*([my])", w)
            if not m:
                raise ValueError(f"unrecognized bin width {width!r}")
            months = int(m[1]) * (12 if m[2] == "y" else 1)
    if months < 1 or (12 % months and months % 12):
        raise ValueError(f"bin width of {months} months does not tile the calendar year")
    return months


def _month_index(d: dt.date) -> int:
    return d.year * 12 + d.month - 1


def _month_start(mi: int) -> dt.date:
    return dt.date(mi // 12, mi % 12 + 1, 1)


@dataclass(frozen=True)
class TimeSeries:
    bin_starts: tuple[dt.date, ...]
    bin_months: int
    counts: np.ndarray

    def __len__(self) -> int:
        return len(self.bin_starts)

    @property
    def bin_ends(self) -> tuple[dt.date, ...]:
        return tuple(_month_start(_month_index(s) + self.bin_months) for s in self.bin_starts)

    def midpoints(self) -> np.ndarray:
        """Bin midpoints as (fractional) proleptic ordinals."""
        return np.array([(s.toordinal() + e.toordinal()) / 2 for s, e in zip(self.bin_starts, self.bin_ends)])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def calendar_bins(start: dt.date, end: dt.date, months: int) -> tuple[dt.date, ...]:
    """Calendar-aligned bin starts covering ``start..end`` (aligned to January for every width)."""
    if end < start:
        raise ValueError("date range end precedes its start")
    first = _month_index(start)
    if months <= 12:
        first -= (first % 12) % months
    else:
        first -= first % months
    last = _month_index(end)
    return tuple(_month_start(mi) for mi in range(first, last + 1, months))


def bin_time_series(dates: Sequence[dt.date], bin_width: str | int, date_range: tuple[dt.date, dt.date],
                    ids: Sequence[str] | None = None) -> TimeSeries:
    """Count dates per calendar-aligned bin over ``date_range`` (inclusive)."""
    months = parse_bin_width(bin_width)
    lo, hi = date_range
    starts = calendar_bins(lo, hi, months)
    first = _month_index(starts[0])
    counts = np.zeros(len(starts), dtype=np.int64)
    for i, d in enumerate(dates):
        if not lo <= d <= hi:
            who = ids[i] if ids is not None else f"#{i}"
            raise ValueError(f"document {who} dated {d} lies outside the range {lo}..{hi}")
        counts[(_month_index(d) - first) // months] += 1
    return TimeSeries(starts, months, counts)


@dataclass(frozen=True)
class SplineCurve:
    """C1 piecewise quadratic through ``(knots[i], values[i])``.

    Piece ``i`` is ``values[i] + slopes[i] * t + curvature[i] * t**2`` with
    ``t = x - knots[i]``; the last piece extrapolates past the final knot.
    """

    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    curvature: np.ndarray

    def _piece(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(_to_ordinal(x), dtype=float)
        i = self._piece(x)
        t = x - self.knots[i]
        return self.values[i] + self.slopes[i] * t + self.curvature[i] * t * t

    def derivative(self, x, side: str = "right") -> np.ndarray:
        """One-sided derivative; ``side="left"`` uses the piece ending at ``x``."""
        x = np.asarray(_to_ordinal(x), dtype=float)
        if side == "left":
            i = np.clip(np.searchsorted(self.knots, x, side="left") - 1, 0, len(self.knots) - 1)
        else:
            i = self._piece(x)
        t = x - self.knots[i]
        return self.slopes[i] + 2 * self.curvature[i] * t


def _to_ordinal(x):
    if isinstance(x, dt.date):
        return float(x.toordinal())
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], dt.date):
        return [float(d.toordinal()) for d in x]
    return x


def quadratic_spline(knots: Sequence[float], values: Sequence[float], initial_slope: float = 0.0) -> SplineCurve:
    """Interpolating quadratic spline with a prescribed slope at the first knot."""
    x = np.asarray(knots, dtype=float)
    y = np.asarray(values, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("a spline needs at least two knots")
    if np.any(np.diff(x) <= 0):
        raise ValueError("knots must be strictly increasing")
    slopes = np.zeros(n)
    curv = np.zeros(n)
    slopes[0] = initial_slope
    for i in range(n - 1):
        h = x[i + 1] - x[i]
        curv[i] = (y[i + 1] - y[i] - slopes[i] * h) / (h * h)
        slopes[i + 1] = slopes[i] + 2 * curv[i] * h
    curv[-1] = curv[-2]
    return SplineCurve(x, y, slopes, curv)


def spline_interpolate(series: TimeSeries) -> SplineCurve:
    """Quadratic spline through the bin counts placed at bin midpoints, flat at the left end."""
    if len(series) < 2:
        raise ValueError("spline interpolation needs at least two bins")
    return quadratic_spline(series.midpoints(), series.counts.astype(float))


def _normalized_texts(docs: Sequence[Document]) -> list[str]:
    return [_WS_RE.sub(" ", normalize_text(d.text)) for d in docs]


def word_presence(docs: Sequence[Document], words: Sequence[str], texts: Sequence[str] | None = None) -> np.ndarray:
    """(doc x word) 0/1 matrix: does the normalized text contain the normalized word or phrase."""
    if not words:
        raise ValueError("word list is empty")
    texts = _normalized_texts(docs) if texts is None else texts
    patterns = [re.compile(r"(?<!\w)" + re.escape(_WS_RE.sub(" ", normalize_text(w).strip())) + r"(?!\w)")
                for w in words]
    out = np.zeros((len(texts), len(words)), dtype=np.int8)
    for i, t in enumerate(texts):
        for j, p in enumerate(patterns):
            if p.search(t):
                out[i, j] = 1
    return out


@dataclass(frozen=True)
class CorrelationMatrix:
    words: tuple[str, ...]
    matrix: np.ndarray
    degenerate: tuple[bool, ...]
    n_docs: int = 0


def phi_correlations(presence: np.ndarray, words: Sequence[str] | None = None) -> CorrelationMatrix:
    """Pearson correlation of 0/1 indicator columns (phi coefficient).

    A constant column has zero variance: it gets 0 off the diagonal, 1 on
    it, and is flagged in ``degenerate``.
    """
    X = np.asarray(presence, dtype=float)
    n, k = X.shape
    if n < 2:
        raise ValueError("phi correlations need at least two documents")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / n
    sd = np.sqrt(np.diag(cov))
    degenerate = sd == 0
    safe = np.where(degenerate, 1.0, sd)
    C = cov / np.outer(safe, safe)
    C[degenerate, :] = 0.0
    C[:, degenerate] = 0.0
    C = np.triu(C, 1)
    C = C + C.T
    np.fill_diagonal(C, 1.0)
    C = np.clip(C, -1.0, 1.0)
    words = tuple(words) if words is not None else tuple(f"w{j}" for j in range(k))
    return CorrelationMatrix(words, C, tuple(bool(d) for d in degenerate), n)


def word_frequencies(presence: np.ndarray) -> np.ndarray:
    X = np.asarray(presence, dtype=float)
    return X.mean(axis=0) if len(X) else np.zeros(X.shape[1])


@dataclass(frozen=True)
class MetadataBreakdown:
    field: str
    groups: dict[str, TimeSeries] = field(default_factory=dict)
    total: TimeSeries | None = None


def _group_key(doc: Document, fld: str, word_re: re.Pattern | None) -> str:
    if word_re is not None:
        return "present" if word_re.search(_WS_RE.sub(" ", normalize_text(doc.text))) else "absent"
    return getattr(doc, fld)


def metadata_breakdown(docs: Sequence[Document], fld: str, top_k: int, bin_width: str | int,
                       date_range: tuple[dt.date, dt.date] | None = None) -> MetadataBreakdown:
    """Per-group time series for the ``top_k`` largest groups plus an ``other`` remainder.

    ``fld`` is a metadata field name or ``"word:<phrase>"`` (present/absent).
    """
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    word_re = None
    if fld.startswith("word:"):
        phrase = _WS_RE.sub(" ", normalize_text(fld[5:]).strip())
        if not phrase:
            raise ValueError("empty word query")
        word_re = re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)")
    elif fld not in METADATA_FIELDS:
        raise ValueError(f"unknown grouping field {fld!r}")
    if date_range is None:
        if not docs:
            raise ValueError("empty document set needs an explicit date range")
        date_range = (min(d.date for d in docs), max(d.date for d in docs))

    keys = [_group_key(d, fld, word_re) for d in docs]
    totals: dict[str, int] = {}
    for k in keys:
        totals[k] = totals.get(k, 0) + 1
    ranked = sorted(totals, key=lambda g: (-totals[g], g))[:top_k]
    chosen = set(ranked)
    groups = {}
    for g in ranked + [OTHER]:
        members = [d.date for d, k in zip(docs, keys) if (k == g if g != OTHER else k not in chosen)]
        groups[g] = bin_time_series(members, bin_width, date_range)
    total = bin_time_series([d.date for d in docs], bin_width, date_range)
    return MetadataBreakdown(fld, groups, total)
