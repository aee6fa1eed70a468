"""Desk-scale experiment drivers on the synthetic corpora.

The four configurations compared throughout are

=========  ===========  ==============
name       syntax bias  code-switching
=========  ===========  ==============
plain      no           no
syn        yes          no
cs         no           yes
full       yes          yes
=========  ===========  ==============

Models are trained on the source language only and evaluated zero-shot
on the others.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .codeswitch import RANDOM_LANGUAGES, CodeSwitchPolicy, ExampleAugmenter
from .conllu_io import Sentence, Token
from .eval_analysis import centroid_similarities, evaluate
from .model import PAIR, TAGGING, LSModel, PairExample, TaggingExample, build_model
from .synth_corpus import PAIR_LABELS, TAG_LABELS, ToyCorpus, default_languages, gen_corpus, gen_lexicons
from .training import TrainingConfig, train

__all__ = ["VARIANTS", "ToySetup", "toy_setup", "RunResult", "run_variant", "alpha_sweep",
           "gradcheck_fixture", "TOY_LEARNING_RATE", "TOY_EPOCHS"]

VARIANTS = {
    "plain": (False, False),
    "syn": (True, False),
    "cs": (False, True),
    "full": (True, True),
}

# The reference rate of 2e-5 suits a pretrained encoder; a randomly
# initialized toy model needs a larger one to learn within a few epochs.
TOY_LEARNING_RATE = 3e-3
TOY_EPOCHS = 10


@dataclass
class ToySetup:
    corpus: ToyCorpus
    lexicons: dict
    words: list[str]
    source: str

    @property
    def targets(self) -> list[str]:
        return [l for l in self.corpus.languages if l != self.source]


def toy_setup(n_train: int = 2000, n_test: int = 500, langs: Sequence[str] = ("en", "fr", "tr"),
              task: str = PAIR, seed: int = 0, lexicon_noise: float = 0.0) -> ToySetup:
    specs = default_languages(langs, seed=seed)
    corpus = gen_corpus(specs, {"train": n_train, "test": n_test}, task=task, seed=seed)
    lexicons = gen_lexicons(specs, noise=lexicon_noise, seed=seed)
    words = sorted({t.form for l in corpus.languages for split in corpus.splits[l].values()
                    for e in split for s in e.sentences for t in s.tokens})
    return ToySetup(corpus, lexicons, words, langs[0])


@dataclass
class RunResult:
    variant: str
    alpha: float
    seed: int
    scores: dict[str, float]
    similarity: dict[str, float]
    seconds: float
    model: LSModel | None = field(default=None, repr=False)

    def target_mean(self, source: str) -> float:
        return float(np.mean([v for k, v in self.scores.items() if k != source]))


def run_variant(setup: ToySetup, bias: bool, alpha: float, seed: int, epochs: int = TOY_EPOCHS,
                learning_rate: float = TOY_LEARNING_RATE, cs_mode: str = RANDOM_LANGUAGES,
                mask_delta: float = 4, keep_model: bool = False, name: str = "") -> RunResult:
    """Train one configuration on the source language and score every language."""
    c = setup.corpus
    labels = PAIR_LABELS if c.task == PAIR else TAG_LABELS
    model = build_model(c.task, labels, setup.words, gat_config={"mask_delta": mask_delta},
                        enc_config={"bias_enabled": bias}, seed=seed)
    augment = None
    if alpha > 0:
        policy = CodeSwitchPolicy(alpha=alpha, mode=cs_mode, candidate_langs=tuple(setup.targets), seed=seed)
        lex = {t: setup.lexicons[(setup.source, t)] for t in setup.targets}
        augment = ExampleAugmenter(lex, policy, families=c.families, target_lang=setup.targets[0])
    cfg = TrainingConfig(learning_rate=learning_rate, epochs=epochs, seed=seed, task=c.task)
    t0 = time.perf_counter()
    train(model, c.examples(setup.source, "train"), cfg, augment=augment)
    tests = {l: c.examples(l, "test") for l in c.languages}
    scores = {l: evaluate(model, exs) for l, exs in tests.items()}
    sims = centroid_similarities(model, tests, setup.source)
    return RunResult(name, alpha, seed, scores, sims, time.perf_counter() - t0,
                     model if keep_model else None)


def alpha_sweep(setup: ToySetup, alphas: Sequence[float], seeds: Sequence[int], bias: bool = True,
                **kw) -> dict[float, list[RunResult]]:
    return {a: [run_variant(setup, bias, a, s, name=f"alpha={a:g}", **kw) for s in seeds] for a in alphas}


def _chain_sentence(sid: str, forms: Sequence[str], upos: Sequence[str], entities=()) -> Sentence:
    """Each token heads the previous one; the last token is the root."""
    n = len(forms)
    toks = []
    for i, (f, u) in enumerate(zip(forms, upos), start=1):
        tag = entities[i - 1] if entities else "O"
        misc = (("Entity", tag),) if tag != "O" else ()
        toks.append(Token(i, f, u, i + 1 if i < n else 0, "dep" if i < n else "root",
                          is_entity=tag != "O", misc=misc))
    return Sentence(sid, tuple(toks))


def gradcheck_fixture(task: str = PAIR, seed: int = 0, embed_scale: float | None = 0.5
                      ) -> tuple[LSModel, object]:
    """A model and an 8-token input for finite-difference checks.

    The input trees are chains, so the distance mask stays local.  With
    ``embed_scale`` set, the four embedding tables are redrawn from
    N(0, embed_scale**2): at the small default scale the GAT rows are
    nearly identical and many gradient coordinates fall below the
    rounding floor of central differences.
    """
    if task == PAIR:
        s1 = _chain_sentence("gc-a", ["the", "old", "dog", "barks"], ["DET", "ADJ", "NOUN", "VERB"])
        s2 = _chain_sentence("gc-b", ["a", "cat", "sees", "Ana"], ["DET", "NOUN", "VERB", "PROPN"])
        model = build_model(PAIR, PAIR_LABELS, s1.forms + s2.forms, seed=seed)
        example = PairExample("gc", s1, s2, 2)
    elif task == TAGGING:
        forms = ["Ana", "of", "the", "big", "red", "house", "near", "Rome"]
        upos = ["PROPN", "ADP", "DET", "ADJ", "ADJ", "NOUN", "ADP", "PROPN"]
        tags = ["B-PER", "O", "O", "O", "O", "O", "O", "B-LOC"]
        s = _chain_sentence("gc", forms, upos, tags)
        model = build_model(TAGGING, TAG_LABELS, forms, seed=seed)
        example = TaggingExample("gc", s)
    else:
        raise ValueError(f"unknown task {task!r}")
    if embed_scale is not None:
        rng = np.random.default_rng([seed, 1])
        for name in ("gat.W_c", "gat.W_pos", "enc.E", "enc.P"):
            model.params[name] = rng.normal(0.0, embed_scale, model.params[name].shape)
    return model, example
