import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from simcase.corpus import Document
from simcase.evaluation import compute_metrics
from simcase.models import (
    DecisionTree,
    ExternalScores,
    Forest,
    LinearModel,
    RegexMatcher,
    Scorer,
    ScoringError,
    hinge_gradient,
    hinge_objective,
    load_external_scores,
    load_scorer,
    logistic_gradient,
    logistic_objective,
    regex_match,
    save_scorer,
    train_linear_svm,
    train_logistic,
    train_random_forest,
)
from simcase.textprep import TextPreprocessor
from simcase.vectorize import fit_tfidf
import datetime as dt

D0 = dt.date(2010, 1, 1)


def _fd(f, w, b, h=1e-6):
    gw = np.zeros_like(w)
    for j in range(len(w)):
        e = np.zeros_like(w)
        e[j] = h
        gw[j] = (f(w + e, b) - f(w - e, b)) / (2 * h)
    return gw, (f(w, b + h) - f(w, b - h)) / (2 * h)


def _rel_err(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)))


def _problem(seed, m=40, n=20):
    rng = np.random.default_rng(seed)
    X = sp.random(m, n, density=0.3, random_state=seed, format="csr") * 3
    y = (rng.random(m) < 0.4).astype(float)
    y[0], y[1] = 0, 1
    return X, y, rng


@pytest.mark.parametrize("seed", range(5))
def test_logistic_gradient_fd(seed):
    X, y, rng = _problem(seed)
    w, b = rng.normal(size=20), float(rng.normal())
    gw, gb = logistic_gradient(w, b, X, y, 1e-2)
    fw, fb = _fd(lambda w_, b_: logistic_objective(w_, b_, X, y, 1e-2), w, b)
    assert _rel_err(gw, fw) < 1e-5 and _rel_err(gb, fb) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_hinge_gradient_fd(seed):
    X, y, rng = _problem(seed)
    while True:
        w, b = rng.normal(size=20), float(rng.normal())
        margins = (2 * y - 1) * (X @ w + b)
        if np.min(np.abs(margins - 1)) > 1e-3:
            break
    gw, gb = hinge_gradient(w, b, X, y, 1e-2)
    fw, fb = _fd(lambda w_, b_: hinge_objective(w_, b_, X, y, 1e-2), w, b)
    assert _rel_err(gw, fw) < 1e-5 and _rel_err(gb, fb) < 1e-5


def _dense_sgd(X, y, kind, l2, lr, epochs, seed, average):
    X = X.toarray()
    w, b = np.zeros(X.shape[1]), 0.0
    sw, sb, k = np.zeros_like(w), 0.0, 0
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(len(y)):
            z = w @ X[i] + b
            if kind == "logistic":
                g = 1 / (1 + np.exp(-z)) - y[i]
            else:
                s = 2 * y[i] - 1
                g = -s if s * z < 1 else 0.0
            w = (1 - lr * l2) * w - lr * g * X[i]
            b -= lr * g
            sw += w
            sb += b
            k += 1
    return (sw / k, sb / k) if average else (w, b)


def test_lazy_sgd_matches_dense_reference():
    X, y, _ = _problem(3, m=30, n=12)
    m = train_logistic(X, y, l2=0.05, lr=0.2, epochs=7, seed=4)
    w, b = _dense_sgd(X, y, "logistic", 0.05, 0.2, 7, 4, False)
    np.testing.assert_allclose(m.weights, w, atol=1e-10)
    assert m.bias == pytest.approx(b, abs=1e-10)
    s = train_linear_svm(X, y, l2=0.05, lr=0.2, epochs=7, seed=4)
    w, b = _dense_sgd(X, y, "hinge", 0.05, 0.2, 7, 4, True)
    np.testing.assert_allclose(s.weights, w, atol=1e-10)
    assert s.bias == pytest.approx(b, abs=1e-10)


def test_lazy_sgd_survives_rescaling():
    # lr * l2 close to 1 forces the scale factor through its renormalization
    X, y, _ = _problem(5, m=30, n=8)
    s = train_linear_svm(X, y, l2=4.0, lr=0.2, epochs=5, seed=1)
    w, b = _dense_sgd(X, y, "hinge", 4.0, 0.2, 5, 1, True)
    np.testing.assert_allclose(s.weights, w, atol=1e-10)


def test_zero_models():
    X = sp.csr_matrix(np.eye(3))
    assert np.all(LinearModel(np.zeros(3), 0.0, "logistic").score(X) == 0.5)
    assert np.all(LinearModel(np.zeros(3), 0.0, "hinge").score(X) == 0.0)


def _one_d():
    X = sp.csr_matrix(np.array([[0.0]] * 50 + [[1.0]] * 50))
    y = np.array([0] * 50 + [1] * 50)
    return X, y


def test_logistic_separable():
    X, y = _one_d()
    m = train_logistic(X, y, epochs=50)
    assert np.all((m.score(X) >= 0.5) == (y == 1))


def test_svm_separable():
    X, y = _one_d()
    s = train_linear_svm(X, y, epochs=50).score(X)
    assert np.all(s[y == 1] >= 0) and np.all(s[y == 0] < 0)


def test_logistic_loss_decreases():
    rng = np.random.default_rng(0)
    X = sp.csr_matrix(rng.random((100, 15)) * (rng.random((100, 15)) < 0.3))
    y = (np.asarray(X[:, 0].todense()).ravel() > 0.1).astype(int)
    m = train_logistic(X, y, lr=0.01, epochs=30)
    assert np.all(np.diff(m.history) <= 1e-12)


def test_single_class_rejected():
    X = sp.csr_matrix(np.eye(4))
    for fn in (train_logistic, train_linear_svm, train_random_forest):
        with pytest.raises(ValueError):
            fn(X, np.ones(4))


def test_training_deterministic():
    X, y, _ = _problem(1)
    a = train_linear_svm(X, y, epochs=5, seed=3).to_dict()
    assert a == train_linear_svm(X, y, epochs=5, seed=3).to_dict()
    f1 = train_random_forest(X, y, trees=7, seed=2).to_dict()
    assert f1 == train_random_forest(X, y, trees=7, seed=2).to_dict()


def test_forest_probe_determinism():
    X, y, _ = _problem(2, m=80)
    probe = sp.random(200, 20, density=0.3, random_state=9, format="csr")
    a = train_random_forest(X, y, trees=10, seed=5).score(probe)
    b = train_random_forest(X, y, trees=10, seed=5).score(probe)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_single_tree_fits_consistent_data(seed):
    X, y, _ = _problem(seed, m=30, n=10)
    # drop duplicate rows with conflicting labels so the data is consistent
    D = X.toarray()
    keep, seen = [], {}
    for i, row in enumerate(map(tuple, D)):
        if seen.setdefault(row, y[i]) == y[i]:
            keep.append(i)
    Xk, yk = sp.csr_matrix(D[keep]), y[keep]
    if yk.min() == yk.max():
        return
    f = train_random_forest(Xk, yk, trees=1, bootstrap=False, max_features=None, seed=seed)
    assert np.all((f.score(Xk) >= 0.5) == (yk == 1))


def _stump(positive: bool):
    return DecisionTree([-1], [0.0], [-1], [-1], [1.0 if positive else 0.0], [1], [0.0])


def test_vote_fraction():
    X = sp.csr_matrix(np.zeros((2, 3)))
    assert np.all(Forest([_stump(True)] * 4, 3).score(X) == 1.0)
    assert np.all(Forest([_stump(True)] * 3 + [_stump(False)], 3).score(X) == 0.75)


def test_tree_validation():
    with pytest.raises(ValueError):
        DecisionTree([0], [0.5], [-1], [-1], [0.5], [2], [0.5])
    with pytest.raises(ValueError):
        DecisionTree([-1], [0.0], [-1], [-1], [1.5], [1], [0.0])


def test_regex_examples():
    bp11 = [["algemas", "algemado"]]
    bp17 = [["precatorio", "precatorios"], ["juros de mora"]]
    assert regex_match("o uso de algemas foi considerado ilegal", bp11) == 1.0
    assert regex_match("o réu foi conduzido ao presídio", bp11) == 0.0
    assert regex_match("pagamento de precatório", bp17) == 0.0
    assert regex_match("Precatório pago com JUROS  DE MORA", bp17) == 1.0
    assert regex_match("Réu ALGEMADO", bp11) == 1.0
    assert regex_match("algemasx", bp11) == 0.0


def test_regex_invalid_pattern_at_load():
    with pytest.raises(ValueError):
        RegexMatcher((("(bad",),))
    with pytest.raises(ValueError):
        RegexMatcher(())


def test_external_scores(tmp_path):
    p = tmp_path / "lstm.csv"
    p.write_text("id,LSTM\nA,0.9\nB,0.1\n", encoding="utf-8")
    ext = load_external_scores(p)
    assert len(ext.scores) == 2 and ext.source == "LSTM"
    sc = Scorer("lstm", ext, 0.5)
    docs = [Document(i, "t", D0) for i in ("A", "B", "C")]
    with pytest.raises(ScoringError, match="'C'"):
        sc.score_documents(docs)
    assert sc.score(docs[0]) == 0.9


@pytest.mark.parametrize("body,msg", [("id,score\nA,0.9\nA,0.2\n", "'A'"), ("id,score\nA,high\n", "non-numeric"),
                                      ("id,score\nA,1.5\n", r"\[0, 1\]"), ("id,score\nA,nan\n", "finite")])
def test_external_scores_errors(tmp_path, body, msg):
    p = tmp_path / "s.csv"
    p.write_text(body, encoding="utf-8")
    with pytest.raises(ScoringError, match=msg):
        load_external_scores(p)


def test_scorer_round_trip_and_threshold_monotone(tmp_path, synth_corpus):
    prep = TextPreprocessor()
    toks = prep.many([d.text for d in synth_corpus])
    tf = fit_tfidf(toks)
    tf.save(tmp_path / "tf.json")
    X = tf.transform_many(toks)
    y = synth_corpus.labels("11")
    for name, model, thr in [("logistic", train_logistic(X, y, epochs=5), 0.5),
                             ("svm", train_linear_svm(X, y, epochs=5), 0.0),
                             ("forest", train_random_forest(X, y, trees=5), 0.5),
                             ("regex", RegexMatcher((("algemas",),)), 0.5)]:
        sc = Scorer(name, model, thr, tf if name != "regex" else None, prep)
        save_scorer(sc, tmp_path / f"{name}.json", tmp_path / "tf.json")
        back = load_scorer(tmp_path / f"{name}.json", prep)
        s1 = sc.score_documents(synth_corpus.documents)
        np.testing.assert_array_equal(s1, back.score_documents(synth_corpus.documents))
        np.testing.assert_array_equal(s1, sc.score_documents(synth_corpus.documents, tokens=toks))
        if name != "svm":
            assert np.all((s1 >= 0) & (s1 <= 1))
        prev = None
        for t in np.sort(np.unique(s1)):
            cur = set(np.flatnonzero(sc.predict(s1, t)))
            assert prev is None or cur <= prev
            prev = cur


def test_tampered_vectorizer_detected(tmp_path):
    prep = TextPreprocessor()
    tf = fit_tfidf([["a", "b"], ["c"]])
    tf.save(tmp_path / "tf.json")
    X = tf.transform_many([["a", "b"], ["c"]])
    sc = Scorer("logistic", train_logistic(X, [1, 0], epochs=2), 0.5, tf, prep)
    save_scorer(sc, tmp_path / "m.json", tmp_path / "tf.json")
    (tmp_path / "tf.json").write_text((tmp_path / "tf.json").read_text().replace('"c"', '"d"'))
    with pytest.raises(ScoringError):
        load_scorer(tmp_path / "m.json")


def test_planted_signal_f1():
    from conftest import small_synth
    from simcase.corpus import stratified_split

    c = small_synth(2000, seed=0, rate=0.1)
    prep = TextPreprocessor()
    toks = prep.many([d.text for d in c])
    split = stratified_split(c, "11", 0.1, 0.1, 0)
    pos = {d.id: i for i, d in enumerate(c)}
    tr = [pos[i] for i in split.train]
    te = [pos[i] for i in split.test]
    tf = fit_tfidf([toks[i] for i in tr])
    X = tf.transform_many(toks)
    y = c.labels("11")
    for model, thr in [(train_logistic(X[tr], y[tr]), 0.5), (train_linear_svm(X[tr], y[tr]), 0.0),
                       (train_random_forest(X[tr], y[tr], trees=30), 0.5)]:
        assert compute_metrics(model.score(X[te]), y[te], thr).f1 >= 0.9
