import datetime as dt

import pytest

from simcase.corpus import SynthConfig, SynthPrecedent, generate_synthetic_corpus

BP11_WORDS = ["algemas", "fuga", "perigo", "integridade", "excepcionalidade", "resistencia"]


def small_synth(n_docs=300, seed=0, cite_before=True, rate=0.15, **kw):
    cfg = SynthConfig(
        n_docs=n_docs,
        precedents=[SynthPrecedent("11", BP11_WORDS, rate, dt.date(2008, 8, 22))],
        start_date=dt.date(2006, 1, 1),
        end_date=dt.date(2012, 12, 31),
        cite_before_publication=cite_before,
        **kw,
    )
    return generate_synthetic_corpus(cfg, seed)


@pytest.fixture(scope="session")
def synth_corpus():
    return small_synth()
