"""Document corpora: loading, validation, stratified splits and synthetic generation."""

from __future__ import annotations

import datetime as dt
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

UNKNOWN = "UNKNOWN"
FIELDS = ("id", "date", "text", "process_type", "state", "decision", "cited_bps")
METADATA_FIELDS = ("process_type", "state", "decision")


class CorpusError(ValueError):
    pass


def parse_date(value) -> dt.date:
    """Parse ISO ``YYYY-MM-DD`` (or ``DD/MM/YYYY``) into a date."""
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if not isinstance(value, str):
        raise ValueError(f"not a date: {value!r}")
    value = value.strip()
    m = re.fullmatch(r"(\d{1,2})/(\d{1,2})/(\d{4})", value)
    if m:
        return dt.date(int(m[3]), int(m[2]), int(m[1]))
    return dt.date.fromisoformat(value[:10] if "T" in value else value)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    date: dt.date
    process_type: str = UNKNOWN
    state: str = UNKNOWN
    decision: str = UNKNOWN
    cited_bps: frozenset[str] = frozenset()

    def cites(self, bp_id: str) -> bool:
        return bp_id in self.cited_bps

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "date": self.date.isoformat(),
            "text": self.text,
            "process_type": self.process_type,
            "state": self.state,
            "decision": self.decision,
            "cited_bps": sorted(self.cited_bps),
        }


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    name: str = "corpus"

    def __post_init__(self):
        seen = set()
        for d in self.documents:
            if d.id in seen:
                raise CorpusError(f"duplicate document id {d.id!r}")
            seen.add(d.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, i: int) -> Document:
        return self.documents[i]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.documents]

    def labels(self, bp_id: str) -> np.ndarray:
        return np.array([d.cites(bp_id) for d in self.documents], dtype=np.int8)

    def subset(self, ids: Iterable[str]) -> "Corpus":
        keep = set(ids)
        return Corpus(tuple(d for d in self.documents if d.id in keep), self.name)

    def date_range(self) -> tuple[dt.date, dt.date]:
        if not self.documents:
            raise CorpusError("empty corpus has no date range")
        return min(self.dates), max(self.dates)


@dataclass(frozen=True)
class CorpusSchema:
    """Validation settings applied at load time."""

    min_date: dt.date | None = None
    max_date: dt.date | None = None


def _record_to_document(rec: dict, lineno: int, schema: CorpusSchema) -> Document:
    if not isinstance(rec, dict):
        raise CorpusError(f"line {lineno}: record is not an object")
    doc_id = rec.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {lineno}: missing or empty id")
    text = rec.get("text")
    if not isinstance(text, str) or not text:
        raise CorpusError(f"line {lineno}: record {doc_id!r} has empty text")
    try:
        date = parse_date(rec.get("date"))
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"line {lineno}: record {doc_id!r} has unparseable date {rec.get('date')!r}") from exc
    if (schema.min_date and date < schema.min_date) or (schema.max_date and date > schema.max_date):
        raise CorpusError(f"line {lineno}: record {doc_id!r} date {date} outside configured range")
    meta = {}
    for key in METADATA_FIELDS:
        value = rec.get(key)
        meta[key] = str(value) if value not in (None, "") else UNKNOWN
    cited = rec.get("cited_bps") or []
    if isinstance(cited, (str, int)) or not isinstance(cited, list):
        raise CorpusError(f"line {lineno}: record {doc_id!r} cited_bps must be an array")
    return Document(doc_id, text, date, cited_bps=frozenset(str(c) for c in cited), **meta)


def load_corpus(path: str | Path, schema: CorpusSchema | None = None, name: str | None = None) -> Corpus:
    """Read a line-delimited JSON corpus file, one document per line."""
    path = Path(path)
    schema = schema or CorpusSchema()
    docs: list[Document] = []
    first_line: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed record ({exc.msg})") from exc
            doc = _record_to_document(rec, lineno, schema)
            if doc.id in first_line:
                raise CorpusError(
                    f"line {lineno}: duplicate id {doc.id!r} (first seen on line {first_line[doc.id]})"
                )
            first_line[doc.id] = lineno
            docs.append(doc)
    return Corpus(tuple(docs), name or path.stem)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class PrecedentSpec:
    """One binding precedent: when it was published and how to query for it.

    ``regex_terms`` is a conjunction of alternation groups: a document
    matches when every group has at least one matching pattern.
    """

    bp_id: str
    publication_date: dt.date
    regex_terms: tuple[tuple[str, ...], ...]
    relevant_words: tuple[str, ...] = ()
    recall_floor: float = 0.9
    aliases: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.regex_terms or not all(self.regex_terms):
            raise CorpusError(f"precedent {self.bp_id}: regex_terms must be non-empty")
        if not 0 < self.recall_floor <= 1:
            raise CorpusError(f"precedent {self.bp_id}: recall floor must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "PrecedentSpec":
        terms = d.get("regex_terms") or []
        groups = tuple((g,) if isinstance(g, str) else tuple(g) for g in terms)
        return cls(
            bp_id=str(d["bp_id"]),
            publication_date=parse_date(d["publication_date"]),
            regex_terms=groups,
            relevant_words=tuple(d.get("relevant_words") or ()),
            recall_floor=float(d.get("recall_floor", 0.9)),
            aliases=tuple(d.get("aliases") or ()),
        )


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    bp_id: str = ""

    def to_dict(self) -> dict:
        return {"bp_id": self.bp_id, "seed": self.seed, "train": list(self.train),
                "validation": list(self.validation), "test": list(self.test)}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(
    corpus: Corpus, bp_id: str, test_frac: float = 0.1, val_frac: float = 0.1, seed: int = 0
) -> DatasetSplit:
    """Split ids into train/validation/test preserving the positive rate of ``bp_id``.

    The test part is drawn first; validation is then carved out of what
    remains for training. Each class is rounded separately, which keeps
    every part within one document of the global positive rate.
    """
    if not 0 < test_frac < 1:
        raise ValueError("test_frac must lie in (0, 1)")
    if not 0 <= val_frac < 1:
        raise ValueError("val_frac must lie in [0, 1)")
    labels = corpus.labels(bp_id)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise CorpusError(f"precedent {bp_id}: need at least one positive and one negative document")

    rng = np.random.default_rng(seed)
    parts: dict[str, list[int]] = {"train": [], "validation": [], "test": []}
    for cls_idx, is_pos in ((pos, True), (neg, False)):
        perm = rng.permutation(cls_idx)
        n_test = _round_half_up(test_frac * len(perm))
        if is_pos:
            n_test = max(1, n_test)
        rest = len(perm) - n_test
        n_val = _round_half_up(val_frac * rest)
        if is_pos and val_frac > 0:
            n_val = max(1, n_val)
        if is_pos and rest - n_val < 1:
            raise CorpusError(
                f"precedent {bp_id}: {len(pos)} positive document(s) cannot cover every part of the split"
            )
        parts["test"].extend(perm[:n_test])
        parts["validation"].extend(perm[n_test:n_test + n_val])
        parts["train"].extend(perm[n_test + n_val:])

    ids = corpus.ids
    # corpus order inside each part keeps splits stable across reloads
    return DatasetSplit(
        train=tuple(ids[i] for i in sorted(parts["train"])),
        validation=tuple(ids[i] for i in sorted(parts["validation"])),
        test=tuple(ids[i] for i in sorted(parts["test"])),
        seed=seed,
        bp_id=bp_id,
    )


# ---------------------------------------------------------------------------
# synthetic corpora

PROCESS_TYPES = ("RE", "ARE", "Rcl", "HC", "Inq", "IF", UNKNOWN)
PROCESS_WEIGHTS = (0.25, 0.3, 0.15, 0.15, 0.05, 0.03, 0.07)
STATES = (
    "AC", "AL", "AM", "AP", "BA", "CE", "DF", "ES", "GO", "MA", "MG", "MS", "MT", "PA",
    "PB", "PE", "PI", "PR", "RJ", "RN", "RO", "RR", "RS", "SC", "SE", "SP", "TO", UNKNOWN,
)
DECISIONS = ("procedural", "granted", "denied", UNKNOWN)
DECISION_WEIGHTS = (0.4, 0.2, 0.3, 0.1)
_FILLER = ("a", "o", "de", "da", "do", "que", "em", "para", "com", "um", "uma", "mas", "no", "na", "por", "os")
_MONTH_NAMES = ("janeiro", "fevereiro", "março", "abril", "maio", "junho", "julho",
                "agosto", "setembro", "outubro", "novembro", "dezembro")
_ONSETS = ("b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "cr", "pr", "tr")
_VOWELS = ("a", "e", "i", "o", "u")


@dataclass
class SynthPrecedent:
    bp_id: str
    topic_words: list[str]
    positive_rate: float = 0.05
    publication_date: dt.date = dt.date(2008, 8, 22)
    word_rate_positive: float = 0.9
    word_rate_negative: float = 0.05

    @classmethod
    def from_dict(cls, d: dict) -> "SynthPrecedent":
        d = dict(d)
        d["bp_id"] = str(d["bp_id"])
        if "publication_date" in d:
            d["publication_date"] = parse_date(d["publication_date"])
        return cls(**d)


@dataclass
class SynthConfig:
    """Topic-planting parameters for :func:`generate_synthetic_corpus`.

    A document is on-topic for a precedent with probability
    ``positive_rate``; each topic word then appears with probability
    ``word_rate_positive`` (``word_rate_negative`` for off-topic
    documents). An on-topic document cites the precedent when it is
    dated on or after the publication date, or always when
    ``cite_before_publication`` is set.
    """

    n_docs: int = 1000
    precedents: list[SynthPrecedent] = field(default_factory=list)
    vocabulary_size: int = 500
    doc_length: tuple[int, int] = (60, 120)
    start_date: dt.date = dt.date(2000, 1, 1)
    end_date: dt.date = dt.date(2019, 12, 31)
    cite_before_publication: bool = False
    date_mention_rate: float = 0.5
    stray_citation_rate: float = 0.2
    vocabulary_seed: int = 0
    name: str = "synthetic"
    id_prefix: str = "D"

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["precedents"] = [SynthPrecedent.from_dict(p) for p in d.get("precedents", [])]
        for key in ("start_date", "end_date"):
            if key in d:
                d[key] = parse_date(d[key])
        if "doc_length" in d:
            d["doc_length"] = tuple(d["doc_length"])
        return cls(**d)


def synthetic_vocabulary(size: int, seed: int = 0, exclude: Iterable[str] = ()) -> list[str]:
    """Deterministic pronounceable pseudo-words, disjoint from ``exclude``."""
    rng = np.random.default_rng(seed)
    banned = set(exclude) | set(_FILLER)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        n_syll = int(rng.integers(2, 5))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                     for _ in range(n_syll))
        if w not in seen and w not in banned:
            seen.add(w)
            words.append(w)
    return words


def _citation_text(bp_id: str, rng: np.random.Generator) -> str:
    forms = ("Súmula Vinculante {}", "Súmula Vinculante nº {}", "SV {}", "súmula vinculante n. {}")
    return forms[rng.integers(len(forms))].format(bp_id)


def _date_text(d: dt.date, rng: np.random.Generator) -> str:
    if rng.random() < 0.5:
        return f"{d.day:02d}/{d.month:02d}/{d.year}"
    return f"{d.day} de {_MONTH_NAMES[d.month - 1]} de {d.year}"


def generate_synthetic_corpus(config: SynthConfig, seed: int = 0) -> Corpus:
    """Generate a labeled corpus with planted topic words, deterministic in ``seed``."""
    for p in config.precedents:
        if not p.topic_words:
            raise CorpusError(f"precedent {p.bp_id}: empty topic word list")
        if not 0 <= p.positive_rate <= 1:
            raise CorpusError(f"precedent {p.bp_id}: positive_rate must lie in [0, 1]")
    if config.start_date > config.end_date:
        raise CorpusError("start_date after end_date")

    topic_tokens = {w.lower() for p in config.precedents for phrase in p.topic_words for w in phrase.split()}
    vocab = synthetic_vocabulary(config.vocabulary_size, config.vocabulary_seed, exclude=topic_tokens)
    rng = np.random.default_rng(seed)
    lo, hi = config.start_date.toordinal(), config.end_date.toordinal()
    proc_p = np.array(PROCESS_WEIGHTS) / sum(PROCESS_WEIGHTS)
    dec_p = np.array(DECISION_WEIGHTS) / sum(DECISION_WEIGHTS)

    docs = []
    for i in range(config.n_docs):
        date = dt.date.fromordinal(int(rng.integers(lo, hi + 1)))
        length = int(rng.integers(config.doc_length[0], config.doc_length[1] + 1))
        words = [vocab[j] for j in rng.integers(len(vocab), size=length)]
        filler_mask = rng.random(length) < 0.3
        words = [_FILLER[rng.integers(len(_FILLER))] if f else w for w, f in zip(words, filler_mask)]

        inserts: list[str] = []
        cited: set[str] = set()
        for p in config.precedents:
            on_topic = rng.random() < p.positive_rate
            rate = p.word_rate_positive if on_topic else p.word_rate_negative
            for tw in p.topic_words:
                if rng.random() < rate:
                    inserts.extend([tw] * (int(rng.integers(1, 4)) if on_topic else 1))
            if on_topic and (config.cite_before_publication or date >= p.publication_date):
                cited.add(p.bp_id)
                inserts.append(_citation_text(p.bp_id, rng))
        if rng.random() < config.stray_citation_rate:
            inserts.append(_citation_text(str(int(rng.integers(1, 59))), rng))
        if rng.random() < config.date_mention_rate:
            inserts.append(_date_text(date, rng))

        for piece in inserts:
            words.insert(int(rng.integers(0, len(words) + 1)), piece)
        sentences = []
        for k in range(0, len(words), 12):
            chunk = " ".join(words[k:k + 12])
            sentences.append(chunk[:1].upper() + chunk[1:] + ".")
        docs.append(Document(
            id=f"{config.id_prefix}{i:06d}",
            text=" ".join(sentences),
            date=date,
            process_type=PROCESS_TYPES[rng.choice(len(PROCESS_TYPES), p=proc_p)],
            state=STATES[rng.integers(len(STATES))],
            decision=DECISIONS[rng.choice(len(DECISIONS), p=dec_p)],
            cited_bps=frozenset(cited),
        ))
    return Corpus(tuple(docs), config.name)


def validate_corpus(corpus: Corpus, precedents: Sequence[PrecedentSpec] = ()) -> list[str]:
    """Return human-readable warnings (the hard invariants are enforced at load)."""
    notes = []
    if len(corpus):
        lo, hi = corpus.date_range()
        for p in precedents:
            if not lo <= p.publication_date <= hi:
                notes.append(f"precedent {p.bp_id}: publication date {p.publication_date} outside corpus range {lo}..{hi}")
            if corpus.labels(p.bp_id).sum() == 0:
                notes.append(f"precedent {p.bp_id}: no document cites it")
    return notes
