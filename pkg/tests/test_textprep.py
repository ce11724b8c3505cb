import unicodedata

from hypothesis import given, settings, strategies as st

from simcase.textprep import (
    DEFAULT_CITATION_PATTERNS,
    MaskingRules,
    TextPreprocessor,
    load_stopwords,
    mask_citations_and_dates,
    normalize_text,
    preprocess,
    strip_accents,
    tokenize,
)

RULES = MaskingRules()

# accented letters of Portuguese and their base letter, written out by hand
PT_ACCENTS = {
    "á": "a", "à": "a", "â": "a", "ã": "a", "é": "e", "ê": "e", "í": "i", "ó": "o",
    "ô": "o", "õ": "o", "ú": "u", "ü": "u", "ç": "c",
    "Á": "a", "À": "a", "Â": "a", "Ã": "a", "É": "e", "Ê": "e", "Í": "i", "Ó": "o",
    "Ô": "o", "Õ": "o", "Ú": "u", "Ü": "u", "Ç": "c", "º": "o", "ª": "a",
}


def table_normalize(text):
    return "".join(PT_ACCENTS.get(c, c.lower()) for c in text)


def test_normalize_examples():
    assert normalize_text("Ação") == "acao"
    assert normalize_text("ABC") == "abc"
    assert normalize_text("Súmula Vinculante nº 11") == "sumula vinculante no 11"


def test_normalize_matches_character_table():
    samples = ["Súmula Vinculante nº 11", "ÁGUA à Beça", "Pôr-do-sol, ação e coração", "1ª Turma do STF"]
    samples.append("".join(PT_ACCENTS))
    for s in samples:
        assert normalize_text(s) == table_normalize(s)


def test_decomposed_input_folds_like_precomposed():
    s = "Ação Pública"
    assert normalize_text(unicodedata.normalize("NFD", s)) == normalize_text(s) == "acao publica"


def test_non_latin_marks_untouched():
    # a combining mark on a Greek letter is not Latin and stays
    assert normalize_text("ά") == unicodedata.normalize("NFC", "ά")
    assert strip_accents("é") == "e"


@settings(max_examples=300)
@given(st.text())
def test_normalize_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


def test_mask_paper_example():
    assert mask_citations_and_dates("conforme a Súmula Vinculante 11, em 12/11/2008", RULES) == "conforme a , em "


def test_mask_no_match_unchanged():
    s = "o réu foi conduzido sem qualquer restrição"
    assert mask_citations_and_dates(s, RULES) == s


def test_mask_variants():
    for s in ["SV 14", "sv-14", "Súmulas Vinculantes", "súmula vinculante n. 17", "SÚMULA VINCULANTE Nº 26",
              "22 de agosto de 2008", "1º de março de 2010", "2008-08-22", "22-08-2008"]:
        assert mask_citations_and_dates(s, RULES).strip() == "", s


def test_mask_keeps_accents_outside_matches():
    out = mask_citations_and_dates("decisão (Súmula Vinculante 11) proferida", RULES)
    assert out == "decisão () proferida"


def test_mask_glued_fragments_removed():
    # deleting the inner date glues a fresh citation together
    s = "súmula 01/02/2003vinculante 7"
    out = mask_citations_and_dates(s, RULES)
    assert RULES.find(out) == []
    assert mask_citations_and_dates(out, RULES) == out


def test_aliases_are_masked():
    rules = RULES.with_aliases(["sumula das algemas"])
    assert mask_citations_and_dates("nos termos da Súmula das Algemas", rules) == "nos termos da "


def test_invalid_pattern_rejected():
    import pytest

    with pytest.raises(ValueError):
        MaskingRules(("(unclosed",))


citation_text = st.lists(
    st.one_of(
        st.sampled_from(["Súmula Vinculante 11", "SV 14", "12/11/2008", "3 de maio de 2001", "súmula",
                         "vinculante", "nº", "de", " ", ",", "7", "-", "/", "algemas"]),
        st.text(max_size=4),
    ),
    max_size=20,
).map("".join)


@settings(max_examples=300)
@given(citation_text)
def test_mask_idempotent_and_complete(s):
    once = mask_citations_and_dates(s, RULES)
    assert mask_citations_and_dates(once, RULES) == once
    assert RULES.find(once) == []


def test_mask_idempotent_on_synthetic_corpus(synth_corpus):
    for d in synth_corpus:
        once = mask_citations_and_dates(d.text, RULES)
        assert mask_citations_and_dates(once, RULES) == once


def test_preprocess_examples():
    assert preprocess("O uso de algemas", {"o", "de"}, RULES) == ["uso", "algemas"]
    assert preprocess("", {"o"}, RULES) == []
    toks = preprocess("O Tribunal aplicou a Súmula Vinculante 14 ao caso.", load_stopwords(), RULES)
    assert "sumula" not in toks and "vinculante" not in toks and "14" not in toks


def test_tokenize_keeps_numbers():
    assert tokenize("lei 10.698 de 100 artigos_x") == ["lei", "10", "698", "de", "100", "artigos", "x"]


def test_shipped_stopwords():
    sw = load_stopwords()
    assert {"a", "o", "um", "mas"} <= sw
    assert all(w == normalize_text(w) for w in sw)


@settings(max_examples=200)
@given(citation_text)
def test_preprocess_output_clean(s):
    sw = load_stopwords()
    toks = preprocess(s, sw, RULES)
    assert not set(toks) & sw
    assert all(t == normalize_text(t) for t in toks)


def test_many_is_order_preserving_across_workers(synth_corpus):
    prep = TextPreprocessor()
    texts = [d.text for d in synth_corpus][:80]
    assert prep.many(texts, workers=1) == prep.many(texts, workers=2) == [prep(t) for t in texts]


def test_default_patterns_are_plain_strings():
    assert all(isinstance(p, str) for p in DEFAULT_CITATION_PATTERNS)
