import numpy as np
import pytest

from lexsyn.codeswitch import CodeSwitchPolicy, augment_sentence
from lexsyn.conllu_io import serialize_conllu, validate_tree
from lexsyn.lexicon import translate
from lexsyn.model import PAIR, TAGGING
from lexsyn.synth_corpus import (PAIR_LABELS, base_words, default_languages, gen_corpus, gen_lexicons,
                                 make_language, read_corpus, write_corpus)


@pytest.fixture(scope="module")
def specs():
    return default_languages(("en", "fr", "tr"))


def test_language_specs_deterministic_and_bijective(specs):
    again = default_languages(("en", "fr", "tr"))
    assert [s.lexicon for s in specs] == [s.lexicon for s in again]
    for s in specs:
        assert len(set(s.lexicon.values())) == len(base_words())
    with pytest.raises(ValueError):
        make_language("xx", "f", "no-such-order")


def test_identical_corpus_bytes(specs, tmp_path):
    a = gen_corpus(specs, {"train": 30, "test": 10}, seed=4)
    b = gen_corpus(specs, {"train": 30, "test": 10}, seed=4)
    lex = gen_lexicons(specs)
    write_corpus(a, lex, tmp_path / "a")
    write_corpus(b, lex, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_needs_two_languages(specs):
    with pytest.raises(ValueError):
        gen_corpus(specs[:1], {"train": 2})


def test_label_priors():
    specs = default_languages(("en", "fr"))
    c = gen_corpus(specs, {"train": 10000}, seed=2, priors=(0.5, 0.3, 0.2))
    counts = np.bincount([e.label for e in c.examples("en", "train")], minlength=3) / 10000
    assert np.all(np.abs(counts - [0.5, 0.3, 0.2]) <= 0.02)


def test_parallel_examples_share_labels_and_trees_are_valid(specs):
    c = gen_corpus(specs, {"train": 50}, seed=1)
    rows = [c.examples(l, "train") for l in c.languages]
    for group in zip(*rows):
        assert len({e.label for e in group}) == 1
        assert len({e.id for e in group}) == 1
        for e in group:
            for s in e.sentences:
                validate_tree(s)


def test_splits_do_not_overlap(specs):
    c = gen_corpus(specs, {"train": 200, "test": 100}, seed=0)
    key = lambda e: tuple(tuple(s.forms) for s in e.sentences)
    train = {key(e) for e in c.examples("en", "train")}
    assert not train & {key(e) for e in c.examples("en", "test")}


def test_lexicon_composition_is_identity(specs):
    lex = gen_lexicons(specs)
    rng = np.random.default_rng(0)
    for a in specs:
        for b in specs:
            if a.code == b.code:
                continue
            for w, _ in base_words():
                there = translate(lex[(a.code, b.code)], a.lexicon[w], rng)
                back = translate(lex[(b.code, a.code)], there, rng)
                assert back == a.lexicon[w]


def test_noise_adds_second_translations(specs):
    lex = gen_lexicons(specs, noise=0.5, seed=1)[("en", "fr")]
    en = specs[0].lexicon
    multi = [w for w, _ in base_words() if len(lex.entries[en[w]]) > 1]
    assert multi
    assert all(lex.entries[en[w]][0] == specs[1].lexicon[w] for w, _ in base_words())


def test_full_alpha_augmentation_has_no_misses(specs):
    c = gen_corpus(specs, {"train": 40}, seed=3)
    lex = gen_lexicons(specs)
    pol = CodeSwitchPolicy(alpha=1.0)
    for e in c.examples("en", "train"):
        for s in e.sentences:
            out, rep = augment_sentence(s, {"fr": lex[("en", "fr")]}, pol, None, np.random.default_rng(0), "fr")
            assert rep.misses == []
            assert out.heads == s.heads


@pytest.mark.parametrize("task", [PAIR, TAGGING])
def test_write_read_roundtrip(specs, tmp_path, task):
    c = gen_corpus(specs, {"train": 12, "test": 5}, task=task, seed=5)
    write_corpus(c, gen_lexicons(specs), tmp_path)
    back = read_corpus(tmp_path)
    assert back.languages == c.languages and back.task == task
    for l in c.languages:
        for split in ("train", "test"):
            a, b = c.examples(l, split), back.examples(l, split)
            assert [e.id for e in a] == [e.id for e in b]
            assert serialize_conllu([s for e in a for s in e.sentences]) == \
                serialize_conllu([s for e in b for s in e.sentences])
            if task == PAIR:
                assert [e.label for e in a] == [e.label for e in b]
            else:
                assert [e.tags for e in a] == [e.tags for e in b]
    assert tuple(back.label_names) == (PAIR_LABELS if task == PAIR else back.label_names)


def test_tagging_corpus_has_entities(specs):
    c = gen_corpus(specs, {"train": 30}, task=TAGGING, seed=0)
    tags = [t for e in c.examples("fr", "train") for t in e.tags]
    assert any(t.startswith("B-") for t in tags)
    assert any(t.startswith("I-") for t in tags)
