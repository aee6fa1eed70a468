import unicodedata

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lexsyn.lexicon import BilingualLexicon, LexiconError, dump_lexicon, load_lexicon, read_lexicon, translate

from conftest import DATA


def test_duplicates_accumulate_in_order():
    lex = load_lexicon("dog hund\ndog köter", "en", "de")
    assert lex.get("dog") == ("hund", "köter")
    assert lex.malformed == 0


def test_blank_line_ignored():
    lex = load_lexicon("dog hund\n\n", "en", "de")
    assert len(lex) == 1 and lex.malformed == 0


def test_three_fields_counted_as_malformed():
    lex = load_lexicon("a b c\ndog hund\n", "en", "de")
    assert lex.malformed == 1
    assert "a" not in lex


def test_empty_entry_set_is_an_error():
    with pytest.raises(LexiconError):
        load_lexicon("", "en", "de")
    with pytest.raises(LexiconError):
        load_lexicon("one two three\n", "en", "de")


def test_nfc_on_load_and_lookup():
    decomposed = unicodedata.normalize("NFD", "köter")
    lex = load_lexicon(f"{decomposed} cur\n", "de", "en")
    assert "köter" in lex
    assert decomposed in lex
    assert lex.get("köter") == ("cur",)


def test_case_sensitive_unless_lowercase():
    lex = load_lexicon("Dog Hund\n", "en", "de")
    assert "dog" not in lex
    low = load_lexicon("Dog Hund\n", "en", "de", lowercase=True)
    assert low.get("DOG") == ("hund",)


def test_golden_muse_bytes():
    lex = read_lexicon(DATA / "muse.txt", "en", "de")
    assert lex.malformed == 1
    assert lex.get("dog") == ("hund", "köter")
    expected = (DATA / "muse.expected.txt").read_bytes()
    assert dump_lexicon(lex) == expected
    assert dump_lexicon(load_lexicon(expected, "en", "de")) == expected


def test_translate_single_and_absent():
    lex = load_lexicon("dog hund\ncat katze\ncat mieze\n", "en", "de")
    rng = np.random.default_rng(0)
    assert all(translate(lex, "dog", rng) == "hund" for _ in range(50))
    assert translate(lex, "horse", rng) is None


def test_translate_uniform_monte_carlo():
    # 5 sigma of a binomial(30000, 1/3) proportion is about 0.0136
    lex = BilingualLexicon("en", "de", {"w": ("a", "b", "c")})
    rng = np.random.default_rng(7)
    draws = [translate(lex, "w", rng) for _ in range(30000)]
    for t in "abc":
        assert 0.323 <= draws.count(t) / 30000 <= 0.343


@given(st.dictionaries(st.text("abcdefgh", min_size=1, max_size=4),
                       st.lists(st.text("xyz", min_size=1, max_size=3), min_size=1, max_size=3, unique=True),
                       min_size=1, max_size=8),
       st.integers(0, 2**32 - 1))
def test_translate_never_fabricates_and_is_deterministic(entries, seed):
    lex = BilingualLexicon("a", "b", {k: tuple(v) for k, v in entries.items()})
    words = list(entries) * 3
    r1 = [translate(lex, w, np.random.default_rng(seed)) for w in words]
    r2 = [translate(lex, w, np.random.default_rng(seed)) for w in words]
    assert r1 == r2
    for w, t in zip(words, r1):
        assert t in entries[w]
