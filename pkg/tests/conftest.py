from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lexsyn.conllu_io import Sentence, Token

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def make_sentence(heads, sid="s", forms=None, upos=None, lang="en", entities=()):
    n = len(heads)
    forms = forms or [f"w{i}" for i in range(1, n + 1)]
    upos = upos or ["NOUN"] * n
    toks = []
    for i, (f, u, h) in enumerate(zip(forms, upos, heads), start=1):
        ent = i in entities
        misc = (("Entity", "B-PER"),) if ent else ()
        toks.append(Token(i, f, u, h, "root" if h == 0 else "dep", lang=lang, is_entity=ent, misc=misc))
    return Sentence(sid, tuple(toks), lang=lang)


def random_heads(rng, n):
    """Parent array of a uniformly shuffled random recursive tree."""
    order = rng.permutation(n) + 1
    heads = [0] * n
    for k in range(1, n):
        heads[order[k] - 1] = int(order[rng.integers(k)])
    return heads


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# (criterion number, passed, detail) rows recorded by test_acceptance
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
