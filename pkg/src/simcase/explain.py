"""Feature importances of TF-IDF classifiers and LIME word explanations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import Document
from .models import Forest, LinearModel, Scorer
from .textprep import mask_citations_and_dates, normalize_text, tokenize
from .vectorize import Vocabulary


class DegenerateImportance(ValueError):
    pass


@dataclass(frozen=True)
class ImportanceRanking:
    items: tuple[tuple[str, float], ...]
    normalized: bool = True

    @property
    def terms(self) -> list[str]:
        return [t for t, _ in self.items]

    def as_dict(self) -> dict[str, float]:
        return dict(self.items)


def _rank(values: np.ndarray, vocab: Vocabulary, k: int, normalize: bool) -> ImportanceRanking:
    if k < 1:
        raise ValueError("k must be at least 1")
    top = float(values.max()) if len(values) else 0.0
    if top <= 0:
        raise DegenerateImportance("all importances are zero; nothing to normalize by")
    # descending importance, ties by term for stable output
    order = sorted(range(len(values)), key=lambda i: (-values[i], vocab.terms[i]))[:k]
    scale = top if normalize else 1.0
    return ImportanceRanking(tuple((vocab.terms[i], float(values[i] / scale)) for i in order), normalize)


def linear_importances(model: LinearModel, vocab: Vocabulary, k: int, normalize: bool = True) -> ImportanceRanking:
    """Rank terms by the absolute value of their linear weight."""
    if model.n_features != len(vocab):
        raise ValueError("model and vocabulary sizes differ")
    return _rank(np.abs(model.weights), vocab, k, normalize)


def forest_impurity_decreases(forest: Forest) -> np.ndarray:
    """(trees x features) weighted Gini decrease per tree."""
    return np.vstack([t.impurity_decrease(forest.n_features) for t in forest.trees])


def forest_importances(forest: Forest, vocab: Vocabulary, k: int, mode: str = "std",
                       normalize: bool = True) -> ImportanceRanking:
    """Rank terms by the mean or the (population) standard deviation across trees of impurity decrease."""
    if forest.n_features != len(vocab):
        raise ValueError("forest and vocabulary sizes differ")
    dec = forest_impurity_decreases(forest)
    if mode == "mean":
        values = dec.mean(axis=0)
    elif mode == "std":
        values = dec.std(axis=0)
    else:
        raise ValueError(f"unknown importance mode {mode!r}")
    return _rank(values, vocab, k, normalize)


def consensus_features(rankings: Sequence[ImportanceRanking], k: int) -> list[str]:
    """Terms in every ranking's top ``k``, by decreasing mean importance."""
    if len(rankings) < 2:
        raise ValueError("consensus needs at least two rankings")
    tops = [dict(r.items[:k]) for r in rankings]
    common = set(tops[0]).intersection(*tops[1:])
    return sorted(common, key=lambda t: (-float(np.mean([top[t] for top in tops])), t))


@dataclass(frozen=True)
class LimeExplanation:
    doc_id: str
    words: tuple[tuple[str, float], ...]
    samples: int
    seed: int
    intercept: float = 0.0

    @property
    def terms(self) -> list[str]:
        return [w for w, _ in self.words]


def lime_weights(predict: Callable[[list[list[str]]], np.ndarray], base_tokens: Sequence[str],
                 features: Sequence[str], samples: int, seed: int, keep_prob: float = 0.5,
                 ridge: float = 1e-6) -> tuple[np.ndarray, float]:
    """Fit score ~ intercept + presence @ coef over random word-removal perturbations.

    Every occurrence of a feature word is dropped together; tokens outside
    ``features`` are always kept.
    """
    d = len(features)
    rng = np.random.default_rng(seed)
    Z = (rng.random((samples, d)) < keep_prob).astype(float)
    pos = {w: j for j, w in enumerate(features)}
    perturbed = []
    for row in Z:
        perturbed.append([t for t in base_tokens if t not in pos or row[pos[t]]])
    y = np.asarray(predict(perturbed), dtype=float)
    A = np.hstack([np.ones((samples, 1)), Z])
    reg = ridge * np.eye(d + 1)
    reg[0, 0] = 0.0
    sol = np.linalg.solve(A.T @ A + reg, A.T @ y)
    return sol[1:], float(sol[0])


def lime_explain(scorer: Scorer | Callable[[list[list[str]]], np.ndarray], doc: Document, samples: int = 1000,
                 n_words: int = 5, seed: int = 0, keep_prob: float = 0.5, stopwords=None,
                 rules=None) -> LimeExplanation:
    """Top-``n_words`` words pushing ``doc`` toward the positive class.

    ``scorer`` is a :class:`Scorer` or any callable scoring lists of
    normalized tokens.
    """
    if samples < 100:
        raise ValueError("LIME needs at least 100 samples")
    if isinstance(scorer, Scorer):
        predict = scorer.score_token_lists
        stopwords = scorer.prep.stopwords if stopwords is None else stopwords
        rules = scorer.prep.rules if rules is None else rules
    else:
        predict = scorer
    stopwords = stopwords or frozenset()
    text = mask_citations_and_dates(doc.text, rules) if rules is not None else doc.text
    base = tokenize(normalize_text(text))
    features = list(dict.fromkeys(t for t in base if t not in stopwords))
    if not features:
        raise ValueError(f"document {doc.id!r} has no word to perturb")
    coef, intercept = lime_weights(predict, base, features, samples, seed, keep_prob)
    order = sorted(range(len(features)), key=lambda j: (-coef[j], features[j]))[:n_words]
    return LimeExplanation(doc.id, tuple((features[j], float(coef[j])) for j in order), samples, seed, intercept)


def lime_aggregate(explanations: Sequence[LimeExplanation], k: int = 5) -> list[tuple[str, float]]:
    """Percentage of documents whose explanation lists each word, top ``k``."""
    if not explanations:
        raise ValueError("no explanations to aggregate")
    counts: dict[str, int] = {}
    for e in explanations:
        for w in set(e.terms):
            counts[w] = counts.get(w, 0) + 1
    ranked = sorted(counts, key=lambda w: (-counts[w], w))[:k]
    return [(w, 100.0 * counts[w] / len(explanations)) for w in ranked]
