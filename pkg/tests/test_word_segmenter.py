import numpy as np
import pytest

from conftest import brute_force_words
from dpdpseg.seq_autoencoder import AeRnnConfig, CodeSequence, forward_nll, init_model
from dpdpseg.word_segmenter import (
    DpdpWordConfig,
    SpanScorer,
    dpdp_words,
    score_span,
    to_output,
)


def tiny_model(seed=0, vocab=5):
    return init_model(AeRnnConfig(vocab=vocab, emb_dim=4, hidden_dim=6, seed=seed))


def zero_model(vocab=100):
    m = init_model(AeRnnConfig(vocab=vocab, emb_dim=4, hidden_dim=6, seed=0))
    for k in m.params:
        m.params[k][:] = 0.0
    return m


def code_seq(codes, span_len=2):
    spans = [(i * span_len, (i + 1) * span_len - 1) for i in range(len(codes))]
    return CodeSequence("u", codes, spans)


def test_score_span_uniform_closed_form():
    m = zero_model(vocab=100)
    codes = [1, 2, 3, 4]
    assert score_span(m, codes, 0, 2) == pytest.approx(3 * np.log(100), abs=1e-9)


def test_score_span_single_matches_forward():
    m = tiny_model()
    codes = [0, 3, 1]
    for i in range(3):
        assert score_span(m, codes, i, i) == forward_nll(m, [codes[i]])


def test_memoized_matches_unmemoized(rng):
    m = tiny_model(seed=2)
    codes = rng.integers(0, 5, size=8).tolist()
    scorer = SpanScorer(m, codes)
    for _ in range(20):
        i = int(rng.integers(0, 8))
        j = int(rng.integers(i, 8))
        first = scorer(i, j)
        assert scorer(i, j) == first  # memo hit, bitwise
        assert first == score_span(m, codes, i, j)


def test_single_unit_sequence():
    m = tiny_model()
    spans = dpdp_words(code_seq([3]), m, DpdpWordConfig(lam=5.0, max_len=50))
    assert len(spans) == 1
    assert (spans[0].i, spans[0].j) == (0, 0)


def test_uniform_scorer_merges_everything():
    # with a uniform scorer a cover of s spans costs N*ln(V) - lam*(N - s),
    # so any positive lam makes the single whole span optimal (enumeration
    # over all covers of N <= 10 confirms)
    m = zero_model(vocab=7)
    codes = list(np.arange(6) % 7)
    lam = 1.0
    spans = dpdp_words(code_seq(codes), m, DpdpWordConfig(lam=lam, max_len=6))
    assert [(s.i, s.j) for s in spans] == [(0, 5)]
    obj = sum(s.nll - lam * (s.j - s.i) for s in spans)
    assert obj == pytest.approx(brute_force_words(codes, m, lam, 6), abs=1e-9)


def test_matches_brute_force(rng):
    for trial in range(15):
        m = tiny_model(seed=trial)
        n = int(rng.integers(1, 9))
        codes = rng.integers(0, 5, size=n).tolist()
        lam = float(rng.uniform(0, 3))
        spans = dpdp_words(code_seq(codes), m, DpdpWordConfig(lam=lam, max_len=n))
        obj = sum(s.nll - lam * (s.j - s.i) for s in spans)
        best = brute_force_words(codes, m, lam, n)
        assert obj == pytest.approx(best, abs=1e-9)


def test_penalty_form_equivalence(rng):
    for trial in range(15):
        m = tiny_model(seed=100 + trial)
        n = int(rng.integers(1, 10))
        codes = rng.integers(0, 5, size=n).tolist()
        lam = float(rng.uniform(0, 3))
        s1 = dpdp_words(code_seq(codes), m, DpdpWordConfig(lam=lam, max_len=n, penalty="duration"))
        s2 = dpdp_words(code_seq(codes), m, DpdpWordConfig(lam=lam, max_len=n, penalty="count"))
        assert [(s.i, s.j) for s in s1] == [(s.i, s.j) for s in s2]


def test_lambda_monotone_span_count(rng):
    for trial in range(5):
        m = tiny_model(seed=200 + trial)
        codes = rng.integers(0, 5, size=10).tolist()
        counts = []
        for lam in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
            spans = dpdp_words(code_seq(codes), m, DpdpWordConfig(lam=lam, max_len=10))
            counts.append(len(spans))
        assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_word_boundaries_subset_of_unit_boundaries(rng):
    m = tiny_model(seed=5)
    codes = rng.integers(0, 5, size=8).tolist()
    cs = code_seq(codes, span_len=3)
    spans = dpdp_words(cs, m, DpdpWordConfig(lam=1.0, max_len=8))
    unit_starts = {a for a, _ in cs.frame_spans}
    unit_ends = {b for _, b in cs.frame_spans}
    for s in spans:
        assert s.frame_a in unit_starts
        assert s.frame_b in unit_ends


def test_to_output_arithmetic():
    from dpdpseg.word_segmenter import WordSpan

    spans = [WordSpan(0, 1, 0, 9, 1.0), WordSpan(2, 3, 10, 19, 1.0)]
    out = to_output("u", spans, 50.0)
    assert [(s.start, s.end) for s in out.segments] == [(0.0, 0.2), (0.2, 0.4)]


def test_to_output_single_span():
    from dpdpseg.word_segmenter import WordSpan

    out = to_output("u", [WordSpan(0, 0, 0, 24, 1.0)], 50.0)
    assert out.segments == [out.segments[0]]
    assert out.segments[0].end == pytest.approx(0.5)


def test_to_output_gap_rejected():
    from dpdpseg.word_segmenter import WordSpan

    spans = [WordSpan(0, 0, 0, 9, 1.0), WordSpan(1, 1, 11, 19, 1.0)]
    with pytest.raises(ValueError):
        to_output("u", spans, 50.0)
