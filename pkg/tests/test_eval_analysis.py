import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lexsyn.eval_analysis import (MissingTestSet, accuracy, centroid_similarities, cosine_similarity, evaluate,
                                  exact_match, iob2_spans, language_centroid, span_f1_iob2, token_accuracy,
                                  transfer_matrix)
from lexsyn.experiments import toy_setup
from lexsyn.model import PAIR, TAGGING, PairExample, build_model
from lexsyn.synth_corpus import PAIR_LABELS, TAG_LABELS


def test_accuracy_examples():
    assert accuracy([1, 2, 0], [1, 2, 2]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        accuracy([1], [1, 2])
    with pytest.raises(ValueError):
        accuracy([], [])
    assert token_accuracy([["O", "B-PER"]], [["O", "O"]]) == 0.5


def test_span_f1_examples():
    gold = ["B-PER", "I-PER", "O", "B-LOC"]
    assert span_f1_iob2(gold, gold) == (1.0, 1.0, 1.0)
    p, r, f = span_f1_iob2(["B-PER", "O", "O", "B-LOC"], gold)
    assert (p, r) == (0.5, 0.5) and f == pytest.approx(0.5)
    assert span_f1_iob2(["O"] * 4, gold) == (0.0, 0.0, 0.0)
    assert span_f1_iob2([["O"], ["B-LOC"]], [["O"], ["B-LOC"]]) == (1.0, 1.0, 1.0)


def test_iob2_spans_and_malformed():
    assert iob2_spans(["I-PER", "I-PER", "B-PER"]) == {(0, 2, "PER"), (2, 3, "PER")}
    assert iob2_spans(["B-PER", "I-LOC"]) == {(0, 1, "PER"), (1, 2, "LOC")}
    with pytest.raises(ValueError):
        iob2_spans(["X-PER"])
    with pytest.raises(ValueError):
        span_f1_iob2(["O"], ["O", "O"])


def test_exact_match():
    assert exact_match(" play music ", "play music") == 1
    assert exact_match("play  music", "play music") == 0


def oracle_spans(tags):
    out, i = set(), 0
    while i < len(tags):
        if tags[i] == "O":
            i += 1
            continue
        typ = tags[i][2:]
        j = i + 1
        while j < len(tags) and tags[j] == f"I-{typ}":
            j += 1
        out.add((i, j, typ))
        i = j
    return out


tag_seq = st.lists(st.sampled_from(["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]), min_size=1, max_size=12)


@given(st.lists(st.tuples(tag_seq, st.integers(0, 2**32 - 1)), min_size=1, max_size=5))
def test_span_f1_matches_set_oracle(rows):
    preds, golds = [], []
    for g, seed in rows:
        rng = np.random.default_rng(seed)
        p = [t if rng.random() < 0.7 else str(rng.choice(["O", "B-PER", "I-LOC"])) for t in g]
        preds.append(p)
        golds.append(g)
    tp = n_p = n_g = 0
    for p, g in zip(preds, golds):
        ps, gs = oracle_spans(p), oracle_spans(g)
        tp, n_p, n_g = tp + len(ps & gs), n_p + len(ps), n_g + len(gs)
    P = tp / n_p if n_p else 0.0
    R = tp / n_g if n_g else 0.0
    F = 2 * P * R / (P + R) if P + R else 0.0
    assert span_f1_iob2(preds, golds) == pytest.approx((P, R, F), abs=1e-12)
    assert 0 <= F <= 1


def test_centroid_equals_streaming_mean(rng):
    vecs = rng.normal(size=(37, 5))
    mean = np.zeros(5)
    for i, v in enumerate(vecs, 1):
        mean += (v - mean) / i
    c = language_centroid(vecs, "xx")
    assert c.count == 37 and np.allclose(c.vector, mean, atol=1e-14)
    with pytest.raises(ValueError):
        language_centroid(np.zeros((0, 5)))


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_scale_invariant(seed, a, b):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=6), rng.normal(size=6)
    assert cosine_similarity(a * u, b * v) == pytest.approx(cosine_similarity(u, v), abs=1e-12)
    assert cosine_similarity(u, u) == pytest.approx(1.0, abs=1e-12)
    assert -1 <= cosine_similarity(u, v) <= 1


def test_cosine_zero_vector():
    with pytest.raises(ValueError):
        cosine_similarity(np.zeros(3), np.ones(3))


@pytest.fixture(scope="module")
def pair_setup():
    s = toy_setup(n_train=8, n_test=12)
    return s, build_model(PAIR, PAIR_LABELS, s.words, seed=1)


def test_transfer_matrix_matches_manual_loop(pair_setup):
    s, m = pair_setup
    tests = {l: s.corpus.examples(l, "test") for l in s.corpus.languages}
    tm = transfer_matrix(m, tests)
    for a in tm.rows:
        for b in tm.cols:
            mixed = [PairExample(x.id, x.s1, y.s2, x.label) for x, y in zip(tests[a], tests[b])]
            preds = m.predict(mixed)
            assert tm.get(a, b) == sum(p == e.label for p, e in zip(preds, mixed)) / len(mixed)
        assert tm.get(a, a) == evaluate(m, tests[a])
    assert tm.to_csv().splitlines()[0] == "accuracy,en,fr,tr"


def test_transfer_matrix_single_language_and_permutation(pair_setup):
    s, m = pair_setup
    tests = {l: s.corpus.examples(l, "test") for l in s.corpus.languages}
    one = transfer_matrix(m, tests, langs=["fr"])
    assert one.values.shape == (1, 1)
    rev = transfer_matrix(m, tests, langs=["tr", "fr", "en"])
    fwd = transfer_matrix(m, tests)
    assert rev.get("tr", "en") == fwd.get("tr", "en")
    with pytest.raises(MissingTestSet):
        transfer_matrix(m, tests, langs=["de"])


def test_evaluation_does_not_mutate(pair_setup):
    s, m = pair_setup
    before = {k: v.copy() for k, v in m.params.items()}
    tests = {l: s.corpus.examples(l, "test") for l in s.corpus.languages}
    transfer_matrix(m, tests)
    centroid_similarities(m, tests, "en")
    assert all(np.array_equal(before[k], m.params[k]) for k in before)


def test_centroid_similarities_keys(pair_setup):
    s, m = pair_setup
    tests = {l: s.corpus.examples(l, "test") for l in s.corpus.languages}
    sims = centroid_similarities(m, tests, "en")
    assert set(sims) == {"fr", "tr"}
    assert all(-1 <= v <= 1 for v in sims.values())


def test_tagging_evaluate_metrics():
    s = toy_setup(n_train=4, n_test=6, task=TAGGING)
    m = build_model(TAGGING, TAG_LABELS, s.words, seed=0)
    exs = s.corpus.examples("en", "test")
    assert 0 <= evaluate(m, exs) <= 1
    assert 0 <= evaluate(m, exs, "token_accuracy") <= 1
    tm = transfer_matrix(m, {"en": exs})
    assert tm.rows == ["span_f1"]
    assert not math.isnan(tm.values[0, 0])
