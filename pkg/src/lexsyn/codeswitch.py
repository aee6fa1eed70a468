"""Code-switching augmentation over dependency-parsed sentences.

Each eligible token is independently picked with probability ``alpha``; a
replacement language is then drawn per picked token according to the
policy mode, and the token's surface form is looked up in the lexicon for
that language.  A dictionary miss leaves the token as it was.  Heads,
relations, POS tags and token order are never touched, so the tree of the
switched sentence is the tree of the original.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .conllu_io import Sentence
from .lexicon import BilingualLexicon, translate

__all__ = [
    "TARGET_ONLY", "SAME_FAMILY", "RANDOM_LANGUAGES", "MODES",
    "DEFAULT_FAMILIES", "CodeSwitchPolicy", "SwitchReport",
    "select_replacements", "choose_replacement_language",
    "code_switch_sentence", "augment_sentence", "augment_corpus",
    "sentence_rng", "write_report",
]

TARGET_ONLY = "target"
SAME_FAMILY = "family"
RANDOM_LANGUAGES = "random"
MODES = (TARGET_ONLY, SAME_FAMILY, RANDOM_LANGUAGES)

# Language grouping used for the per-language analysis of the original study.
DEFAULT_FAMILIES: dict[str, str] = {
    "en": "IE.Germanic", "de": "IE.Germanic",
    "es": "IE.Romance", "fr": "IE.Romance",
    "bg": "IE.Slavic", "ru": "IE.Slavic",
    "ar": "Afro-asiatic",
    "vi": "Austro-asiatic",
    "tr": "Altaic", "ur": "Altaic",
    "el": "IE.Greek",
    "hi": "IE.Indic",
    "zh": "Sino-tibetan",
    "ko": "Korean",
}


@dataclass(frozen=True)
class CodeSwitchPolicy:
    alpha: float = 0.5
    mode: str = TARGET_ONLY
    candidate_langs: tuple[str, ...] = ()
    protect_entities: bool = False
    seed: int = 0
    excluded_upos: frozenset[str] = field(default_factory=lambda: frozenset({"PUNCT"}))

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode != TARGET_ONLY and not self.candidate_langs:
            raise ValueError(f"mode {self.mode!r} needs a non-empty candidate_langs")
        object.__setattr__(self, "candidate_langs", tuple(self.candidate_langs))
        object.__setattr__(self, "excluded_upos", frozenset(self.excluded_upos))

    def eligible(self, s: Sentence) -> list[bool]:
        return [
            not (self.protect_entities and t.is_entity) and t.upos not in self.excluded_upos
            for t in s.tokens
        ]


@dataclass
class SwitchReport:
    sentence_id: str
    selected: list[int]
    replaced: list[int]
    misses: list[int]
    languages_used: dict[str, int]

    def to_json(self) -> str:
        return json.dumps({
            "sentence_id": self.sentence_id,
            "selected": self.selected,
            "replaced": self.replaced,
            "misses": self.misses,
            "languages_used": self.languages_used,
        }, sort_keys=True)


def sentence_rng(seed: int, key: str, epoch: int = 0) -> np.random.Generator:
    """Independent generator for one sentence, stable across processes."""
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng([seed, epoch, int.from_bytes(digest, "little")])


def select_replacements(s: Sentence, policy: CodeSwitchPolicy, rng: np.random.Generator) -> set[int]:
    """1-based indices of tokens picked for replacement.

    One uniform is drawn per token, eligible or not, so the stream position
    after the call depends only on sentence length.
    """
    u = rng.random(s.n)
    eligible = policy.eligible(s)
    return {i + 1 for i in range(s.n) if eligible[i] and u[i] < policy.alpha}


def choose_replacement_language(policy: CodeSwitchPolicy, target_lang: str,
                                families: Mapping[str, str] | None,
                                rng: np.random.Generator) -> str:
    if policy.mode == TARGET_ONLY:
        return target_lang
    if policy.mode == SAME_FAMILY:
        families = DEFAULT_FAMILIES if families is None else families
        family = families.get(target_lang)
        pool = [c for c in policy.candidate_langs
                if family is not None and families.get(c) == family]
        if not pool:
            raise ValueError(f"no candidate language shares the family of {target_lang!r}")
    else:
        pool = list(policy.candidate_langs)
    return pool[int(rng.integers(len(pool)))]


def augment_sentence(s: Sentence, lexicons: Mapping[str, BilingualLexicon], policy: CodeSwitchPolicy,
                     families: Mapping[str, str] | None, rng: np.random.Generator,
                     target_lang: str | None = None) -> tuple[Sentence, SwitchReport]:
    """Code-switch ``s`` and report what happened.

    ``lexicons`` maps a target language code to the lexicon from the
    language of ``s`` into it.  ``target_lang`` defaults to the first
    candidate language.
    """
    if target_lang is None:
        if not policy.candidate_langs:
            raise ValueError("target_lang is required when the policy has no candidates")
        target_lang = policy.candidate_langs[0]

    selected = sorted(select_replacements(s, policy, rng))
    tokens = list(s.tokens)
    replaced, misses = [], []
    used: Counter[str] = Counter()
    for i in selected:
        lang = choose_replacement_language(policy, target_lang, families, rng)
        if lang == s.lang:
            continue
        lex = lexicons.get(lang)
        if lex is not None and s.lang and lex.source_lang != s.lang:
            raise ValueError(
                f"lexicon for {lang!r} translates from {lex.source_lang!r}, sentence is {s.lang!r}")
        tok = tokens[i - 1]
        new_form = None if lex is None else translate(lex, tok.form, rng)
        if new_form is None:
            misses.append(i)
            continue
        tokens[i - 1] = replace(tok, form=new_form, lang=lang).with_misc("CSLang", lang)
        replaced.append(i)
        used[lang] += 1

    out = replace(s, tokens=tuple(tokens)) if replaced else s
    report = SwitchReport(s.id, selected, replaced, misses, dict(sorted(used.items())))
    return out, report


def code_switch_sentence(s: Sentence, lexicons: Mapping[str, BilingualLexicon], policy: CodeSwitchPolicy,
                         families: Mapping[str, str] | None, rng: np.random.Generator,
                         target_lang: str | None = None) -> Sentence:
    return augment_sentence(s, lexicons, policy, families, rng, target_lang)[0]


def augment_corpus(sentences: Iterable[Sentence], lexicons: Mapping[str, BilingualLexicon],
                   policy: CodeSwitchPolicy, families: Mapping[str, str] | None = None,
                   target_lang: str | None = None, epoch: int = 0
                   ) -> tuple[list[Sentence], list[SwitchReport]]:
    """Augment every sentence with a generator derived from (seed, id, epoch)."""
    out, reports = [], []
    for s in sentences:
        rng = sentence_rng(policy.seed, s.id, epoch)
        new, rep = augment_sentence(s, lexicons, policy, families, rng, target_lang)
        out.append(new)
        reports.append(rep)
    return out, reports


def write_report(path, reports: Iterable[SwitchReport]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(r.to_json() + "\n")


class ExampleAugmenter:
    """Code-switch every sentence of a task example; call as ``aug(example, epoch)``.

    ``lexicons`` maps target language to the lexicon out of the source
    language.  Each sentence gets its own generator derived from the policy
    seed, its id and the epoch, so results do not depend on batch order.
    """

    def __init__(self, lexicons: Mapping[str, BilingualLexicon], policy: CodeSwitchPolicy,
                 families: Mapping[str, str] | None = None, target_lang: str | None = None):
        self.lexicons = dict(lexicons)
        self.policy = policy
        self.families = families
        self.target_lang = target_lang
        self.reports: list[SwitchReport] = []
        self.keep_reports = False

    def __call__(self, example, epoch: int = 0):
        if self.policy.alpha == 0.0:
            return example
        out = []
        for s in example.sentences:
            rng = sentence_rng(self.policy.seed, s.id, epoch)
            new, rep = augment_sentence(s, self.lexicons, self.policy, self.families, rng, self.target_lang)
            if self.keep_reports:
                self.reports.append(rep)
            out.append(new)
        return example.with_sentences(*out)
