import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simcase.vectorize import TfidfModel, fit_tfidf
from oracles import tfidf_dense

streams = st.lists(st.lists(st.sampled_from([f"t{i}" for i in range(30)]), max_size=15), min_size=1, max_size=12)


def test_counting_example():
    m = fit_tfidf([["a", "b"], ["a", "c"], ["a"]])
    assert m.doc_count == 3
    assert dict(zip(m.vocabulary.terms, m.doc_freq)) == {"a": 3, "b": 1, "c": 1}


def test_df_counts_documents_not_occurrences():
    m = fit_tfidf([["x", "x", "x"]])
    assert m.doc_freq == (1,)


def test_transform_examples():
    m = fit_tfidf([["a", "b"], ["a", "c"], ["a"]])
    v = m.transform(["b"])
    assert v.as_dict() == {m.vocabulary.index("b"): pytest.approx(math.log(3), abs=1e-15)}
    assert abs(v.weights[0] - 1.0986122886681098) < 1e-12
    assert len(m.transform(["a", "a"])) == 0
    assert len(m.transform(["zzz"])) == 0
    assert len(m.transform([])) == 0


def test_empty_collections_rejected():
    with pytest.raises(ValueError):
        fit_tfidf([])
    with pytest.raises(ValueError):
        fit_tfidf([[], []])


@settings(max_examples=200, deadline=None)
@given(streams, st.lists(st.sampled_from([f"t{i}" for i in range(35)]), max_size=20))
def test_matches_dense_oracle(docs, query):
    if not any(docs):
        return
    m = fit_tfidf(docs)
    terms, expected = tfidf_dense(docs, query)
    assert list(m.vocabulary.terms) == terms
    got = m.transform(query).to_dense(len(terms))
    assert np.max(np.abs(got - expected), initial=0.0) < 1e-12
    assert np.all(got >= 0)
    doubled = m.transform(query + query).to_dense(len(terms))
    np.testing.assert_allclose(doubled, 2 * got, rtol=0, atol=1e-12)


def test_df_brute_force_on_synthetic_streams():
    rng = np.random.default_rng(0)
    docs = [[f"w{j}" for j in rng.integers(0, 200, size=rng.integers(1, 30))] for _ in range(1000)]
    m = fit_tfidf(docs)
    for term, df in zip(m.vocabulary.terms, m.doc_freq):
        assert df == sum(term in set(d) for d in docs)


def test_batch_matches_single():
    docs = [["a", "b", "b"], ["c"], ["a", "d"], []]
    m = fit_tfidf(docs)
    X = m.transform_many(docs).toarray()
    for row, d in zip(X, docs):
        np.testing.assert_array_equal(row, m.transform(d).to_dense(m.n_terms))


def test_relative_and_l2_modes():
    docs = [["a", "b", "b"], ["c"], ["a"]]
    rel = fit_tfidf(docs, tf_mode="relative")
    base = fit_tfidf(docs)
    np.testing.assert_allclose(rel.transform(docs[0]).to_dense(3), base.transform(docs[0]).to_dense(3) / 3)
    l2 = fit_tfidf(docs, l2_normalize=True)
    assert np.linalg.norm(l2.transform(docs[0]).to_dense(3)) == pytest.approx(1.0)


def test_save_load_bit_faithful(tmp_path):
    docs = [["ação", "b"], ["b", "c"], ["d"]]
    m = fit_tfidf(docs)
    m.save(tmp_path / "m.json")
    back = TfidfModel.load(tmp_path / "m.json")
    assert back == m or back.to_dict() == m.to_dict()
    assert back.transform(["b", "d"]) == m.transform(["b", "d"])


def test_bad_file_rejected():
    with pytest.raises(ValueError):
        TfidfModel.from_dict({"format": "other"})
