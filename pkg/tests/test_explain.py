import datetime as dt

import numpy as np
import pytest

from simcase.corpus import Document
from simcase.explain import (
    DegenerateImportance,
    ImportanceRanking,
    LimeExplanation,
    consensus_features,
    forest_importances,
    lime_aggregate,
    lime_explain,
    linear_importances,
)
from simcase.models import DecisionTree, Forest, LinearModel, Scorer, train_logistic, train_random_forest
from simcase.textprep import MaskingRules, TextPreprocessor
from simcase.vectorize import Vocabulary, fit_tfidf
import scipy.sparse as sp

VOCAB = Vocabulary(("a", "b", "c"))
D0 = dt.date(2010, 1, 1)


def test_linear_importances_example():
    r = linear_importances(LinearModel(np.array([2.0, -1.0, 0.5]), 0.0, "logistic"), VOCAB, 3)
    assert r.items == (("a", 1.0), ("b", 0.5), ("c", 0.25))
    with pytest.raises(DegenerateImportance):
        linear_importances(LinearModel(np.zeros(3), 0.0, "hinge"), VOCAB, 3)
    with pytest.raises(ValueError):
        linear_importances(LinearModel(np.ones(3), 0.0, "hinge"), VOCAB, 0)


def _tree(feature, n, imp, value):
    # root splits on ``feature`` into two pure leaves
    return DecisionTree([feature, -1, -1], [0.5, 0, 0], [1, -1, -1], [2, -1, -1], value, n, imp)


def test_forest_importances_hand_tally():
    # tree 1: feature 0 splits 10 samples (gini .48) into 4 (gini 0) and 6 (gini 0)
    t1 = _tree(0, [10, 4, 6], [0.48, 0.0, 0.0], [0.4, 1.0, 0.0])
    # tree 2: feature 1 splits 8 samples (gini .5) into 4 (gini .375) and 4 (gini 0)
    t2 = _tree(1, [8, 4, 4], [0.5, 0.375, 0.0], [0.5, 0.25, 1.0])
    f = Forest([t1, t2], 3)
    dec = np.array([[0.48, 0.0, 0.0], [0.0, (8 * 0.5 - 4 * 0.375) / 8, 0.0]])
    mean = forest_importances(f, VOCAB, 3, "mean", normalize=False).as_dict()
    std = forest_importances(f, VOCAB, 3, "std", normalize=False).as_dict()
    for j, t in enumerate("abc"):
        assert mean[t] == pytest.approx(dec[:, j].mean(), abs=1e-15)
        assert std[t] == pytest.approx(dec[:, j].std(), abs=1e-15)
    assert mean["c"] == 0.0
    with pytest.raises(ValueError):
        forest_importances(f, VOCAB, 3, "median")


def test_single_feature_forest():
    X = sp.csr_matrix(np.array([[0.0], [1.0], [0.0], [2.0]] * 5))
    y = np.array([0, 1, 0, 1] * 5)
    f = train_random_forest(X, y, trees=5, seed=1)
    for mode in ("mean", "std"):
        try:
            r = forest_importances(f, Vocabulary(("x",)), 1, mode)
        except DegenerateImportance:
            assert mode == "std"  # identical trees have no spread
            continue
        assert r.items == (("x", 1.0),)


def _rank(*items):
    return ImportanceRanking(tuple(items))


def test_consensus_examples():
    r = _rank(("algemas", 1.0), ("uso", 0.8), ("x", 0.5))
    assert consensus_features([r, r], 2) == ["algemas", "uso"]
    assert consensus_features([_rank(("a", 1.0)), _rank(("b", 1.0))], 1) == []
    rs = [_rank(("algemas", 1.0), ("uso", 0.9), ("p", 0.8), ("q", 0.7), ("r", 0.6)),
          _rank(("uso", 1.0), ("s", 0.9), ("algemas", 0.85), ("t", 0.6), ("u", 0.5)),
          _rank(("v", 1.0), ("algemas", 0.9), ("w", 0.8), ("uso", 0.3), ("z", 0.2))]
    assert consensus_features(rs, 5) == ["algemas", "uso"]
    with pytest.raises(ValueError):
        consensus_features(rs[:1], 5)


def test_planted_word_ranks_first(synth_corpus):
    prep = TextPreprocessor()
    toks = prep.many([d.text for d in synth_corpus])
    tf = fit_tfidf(toks)
    m = train_logistic(tf.transform_many(toks), synth_corpus.labels("11"))
    top = linear_importances(m, tf.vocabulary, 6).terms
    assert top[0] in {"algemas", "fuga", "perigo", "integridade", "excepcionalidade", "resistencia"}
    assert max(v for _, v in linear_importances(m, tf.vocabulary, 6).items) == 1.0


def _linear_scorer(weights: dict, bias=0.1):
    def predict(token_lists):
        return np.array([bias + sum(w for t, w in weights.items() if t in set(toks)) for toks in token_lists])
    return predict


NO_MASK = MaskingRules((), ())


def test_lime_constant_scorer():
    doc = Document("x", "alfa beta gama delta epsilon", D0)
    e = lime_explain(lambda tl: np.full(len(tl), 0.3), doc, 1000, 5, seed=0, stopwords=frozenset(), rules=NO_MASK)
    assert all(abs(w) < 1e-6 for _, w in e.words)
    assert len(e.words) == 5


def test_lime_recovers_linear_weights():
    true = {"alfa": 0.5, "beta": 0.3, "gama": 0.2, "delta": -0.1, "epsilon": 0.05}
    doc = Document("x", "Alfa beta, gama; delta epsilon alfa", D0)
    e = lime_explain(_linear_scorer(true), doc, 5000, 5, seed=3, stopwords=frozenset(), rules=NO_MASK)
    got = dict(e.words)
    for w, v in true.items():
        assert abs(got[w] - v) <= 0.1 * abs(v)
    assert e.terms[:3] == ["alfa", "beta", "gama"]
    assert e.intercept == pytest.approx(0.1, abs=1e-9)


def test_lime_deterministic_and_stopwords_kept():
    doc = Document("x", "o uso de algemas", D0)
    f = _linear_scorer({"algemas": 1.0, "o": 5.0})
    a = lime_explain(f, doc, 200, 5, seed=1, stopwords=frozenset({"o", "de"}), rules=NO_MASK)
    b = lime_explain(f, doc, 200, 5, seed=1, stopwords=frozenset({"o", "de"}), rules=NO_MASK)
    assert a == b
    assert set(a.terms) == {"uso", "algemas"}
    assert a.terms[0] == "algemas"


def test_lime_with_logistic_scorer():
    tf = fit_tfidf([["algemas", "uso"], ["outro", "uso"], ["mais"]])
    w = np.zeros(tf.n_terms)
    w[tf.vocabulary.index("algemas")] = 2.0
    sc = Scorer("logistic", LinearModel(w, -1.0, "logistic"), 0.5, tf, TextPreprocessor())
    e = lime_explain(sc, Document("x", "uso de algemas e mais outro", D0), 500, 5, seed=0)
    assert e.terms[0] == "algemas" and e.words[0][1] > 0


def test_lime_errors():
    f = _linear_scorer({})
    with pytest.raises(ValueError):
        lime_explain(f, Document("x", "o de", D0), 500, stopwords=frozenset({"o", "de"}), rules=NO_MASK)
    with pytest.raises(ValueError):
        lime_explain(f, Document("x", "alfa", D0), 50, rules=NO_MASK)


def test_lime_aggregate():
    ex = [LimeExplanation("1", (("a", 1.0), ("b", 0.5)), 100, 0),
          LimeExplanation("2", (("a", 1.0),), 100, 0),
          LimeExplanation("3", (("c", 1.0),), 100, 0)]
    agg = dict(lime_aggregate(ex, 5))
    assert round(agg["a"], 1) == 66.7 and "z" not in agg
    with pytest.raises(ValueError):
        lime_aggregate([], 5)
