"""Uniform scoring over TF-IDF models, regex queries and precomputed scores."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import Document
from ..textprep import TextPreprocessor, fold_pattern, normalize_text
from ..vectorize import TfidfModel
from .forest import Forest
from .linear import LinearModel

MODEL_FORMAT_VERSION = 1
_WS_RE = re.compile(r"\s+")

# positive iff score >= threshold
DEFAULT_THRESHOLDS = {"svm": 0.0, "logistic": 0.5, "forest": 0.5, "regex": 0.5}


class ScoringError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegexMatcher:
    """AND over groups, OR within a group; patterns match whole words of normalized text."""

    groups: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.groups or not all(self.groups):
            raise ValueError("regex query needs at least one non-empty group")
        compiled = []
        for group in self.groups:
            alts = []
            for p in group:
                try:
                    alts.append(re.compile(rf"(?<!\w)(?:{fold_pattern(p)})(?!\w)", re.IGNORECASE))
                except re.error as exc:
                    raise ValueError(f"invalid regex term {p!r}: {exc}") from exc
            compiled.append(tuple(alts))
        object.__setattr__(self, "_compiled", tuple(compiled))

    def match_normalized(self, text: str) -> bool:
        return all(any(p.search(text) for p in group) for group in self._compiled)

    def score_text(self, text: str) -> float:
        return 1.0 if self.match_normalized(_WS_RE.sub(" ", normalize_text(text))) else 0.0


def regex_match(doc_text: str, regex_terms: Sequence[Sequence[str]]) -> float:
    return RegexMatcher(tuple(tuple(g) for g in regex_terms)).score_text(doc_text)


@dataclass(frozen=True)
class ExternalScores:
    scores: dict[str, float]
    source: str = "external"

    def lookup(self, doc_id: str) -> float:
        try:
            return self.scores[doc_id]
        except KeyError:
            raise ScoringError(f"{self.source} scores have no entry for document {doc_id!r}") from None


def load_external_scores(path: str | Path, source: str | None = None) -> ExternalScores:
    """Read ``id,score`` rows. A header whose second column is not ``score`` names the source."""
    path = Path(path)
    scores: dict[str, float] = {}
    label = source
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ScoringError(f"{path}: empty score file")
    header = [c.strip() for c in rows[0]]
    start = 0
    if len(header) >= 2 and header[0].lower() == "id":
        start = 1
        if header[1].lower() != "score" and label is None:
            label = header[1]
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or not "".join(row).strip():
            continue
        if len(row) < 2:
            raise ScoringError(f"{path}: line {lineno}: expected two columns")
        doc_id = row[0].strip()
        try:
            value = float(row[1])
        except ValueError:
            raise ScoringError(f"{path}: line {lineno}: non-numeric score {row[1]!r} for {doc_id!r}") from None
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise ScoringError(f"{path}: line {lineno}: score for {doc_id!r} must be a finite value in [0, 1]")
        if doc_id in scores:
            raise ScoringError(f"{path}: line {lineno}: duplicate id {doc_id!r}")
        scores[doc_id] = value
    return ExternalScores(scores, label or path.stem)


@dataclass
class Scorer:
    """One retrieval model behind a single score/threshold interface."""

    name: str
    model: LinearModel | Forest | RegexMatcher | ExternalScores
    threshold: float
    tfidf: TfidfModel | None = None
    prep: TextPreprocessor = field(default_factory=TextPreprocessor)

    def __post_init__(self):
        if isinstance(self.model, (LinearModel, Forest)) and self.tfidf is None:
            raise ValueError(f"scorer {self.name!r} needs a fitted TF-IDF model")

    @property
    def kind(self) -> str:
        if isinstance(self.model, LinearModel):
            return "svm" if self.model.kind == "hinge" else "logistic"
        if isinstance(self.model, Forest):
            return "forest"
        if isinstance(self.model, RegexMatcher):
            return "regex"
        return "external"

    def _score_streams(self, streams: Sequence[Sequence[str]]) -> np.ndarray:
        X = self.tfidf.transform_many(streams)
        return np.asarray(self.model.score(X), dtype=float)

    def score_documents(self, docs: Sequence[Document], tokens: Sequence[Sequence[str]] | None = None,
                        workers: int = 1) -> np.ndarray:
        """Score documents; ``tokens`` may carry their already-preprocessed streams."""
        if isinstance(self.model, ExternalScores):
            return np.array([self.model.lookup(d.id) for d in docs], dtype=float)
        if isinstance(self.model, RegexMatcher):
            return np.array([self.model.score_text(d.text) for d in docs], dtype=float)
        if tokens is None:
            tokens = self.prep.many([d.text for d in docs], workers=workers)
        return self._score_streams(tokens)

    def score(self, doc: Document) -> float:
        return float(self.score_documents([doc])[0])

    def score_token_lists(self, token_lists: Sequence[Sequence[str]]) -> np.ndarray:
        """Score normalized token sequences (stopwords included), e.g. LIME perturbations."""
        if isinstance(self.model, ExternalScores):
            raise ScoringError("static external scores cannot be re-scored on perturbed text")
        if isinstance(self.model, RegexMatcher):
            return np.array([float(self.model.match_normalized(" ".join(t))) for t in token_lists])
        stop = self.prep.stopwords
        return self._score_streams([[t for t in toks if t not in stop] for toks in token_lists])

    def predict(self, scores: np.ndarray, threshold: float | None = None) -> np.ndarray:
        t = self.threshold if threshold is None else threshold
        return np.asarray(scores) >= t


def _params(model) -> dict:
    if isinstance(model, (LinearModel, Forest)):
        return model.to_dict()
    if isinstance(model, RegexMatcher):
        return {"groups": [list(g) for g in model.groups]}
    raise ScoringError("external scores are not persisted as model files")


def save_scorer(scorer: Scorer, path: str | Path, vectorizer_path: str | Path | None = None) -> None:
    """Write a self-describing model file; the TF-IDF model is referenced by path and hash."""
    path = Path(path)
    ref = None
    if scorer.tfidf is not None:
        if vectorizer_path is None:
            raise ValueError("TF-IDF scorers need the path of their saved vectorizer")
        vp = Path(vectorizer_path)
        ref = {"path": str(Path(vp).name) if vp.parent == path.parent else str(vp),
               "sha256": hashlib.sha256(vp.read_bytes()).hexdigest()}
    payload = {
        "format": "simcase.model",
        "version": MODEL_FORMAT_VERSION,
        "name": scorer.name,
        "kind": scorer.kind,
        "threshold": scorer.threshold,
        "vectorizer": ref,
        "params": _params(scorer.model),
    }
    path.write_text(json.dumps(payload), encoding="utf-8")


def load_scorer(path: str | Path, prep: TextPreprocessor | None = None) -> Scorer:
    path = Path(path)
    d = json.loads(path.read_text(encoding="utf-8"))
    if d.get("format") != "simcase.model" or d.get("version") != MODEL_FORMAT_VERSION:
        raise ScoringError(f"{path}: not a simcase model file (or unsupported version)")
    tfidf = None
    if d.get("vectorizer"):
        vp = Path(d["vectorizer"]["path"])
        if not vp.is_absolute():
            vp = path.parent / vp
        raw = vp.read_bytes()
        if hashlib.sha256(raw).hexdigest() != d["vectorizer"]["sha256"]:
            raise ScoringError(f"{path}: vectorizer {vp} does not match the recorded hash")
        tfidf = TfidfModel.from_dict(json.loads(raw))
    kind = d["kind"]
    if kind in ("svm", "logistic"):
        model = LinearModel.from_dict(d["params"])
    elif kind == "forest":
        model = Forest.from_dict(d["params"])
    elif kind == "regex":
        model = RegexMatcher(tuple(tuple(g) for g in d["params"]["groups"]))
    else:
        raise ScoringError(f"{path}: unknown model kind {kind!r}")
    return Scorer(d["name"], model, float(d["threshold"]), tfidf, prep or TextPreprocessor())
