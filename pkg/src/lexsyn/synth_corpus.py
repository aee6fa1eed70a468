"""Seeded toy multilingual corpora with gold trees, labels and lexicons.

Every example starts as a language-neutral base clause::

    VERB(root)
      nsubj  PROPN name  [flat PROPN surname]  amod ADJ
      obj    NOUN        [det DET]             amod ADJ
      [advmod ADV]  [obl PROPN place  case ADP]  punct

A toy language renders a base clause with its own word list and its own
word-order templates; heads are remapped so every rendering carries the
same tree.  Names and places keep their form in every language.

Adjectives come in two polarity classes.  The pair-task label counts the
positive adjectives attached to the subjects of the two sentences (0, 1 or
2), so it depends on both word identity and on which noun each adjective
modifies.  The tagging task marks names (PER) and places (LOC) in IOB2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .conllu_io import Sentence, Token, parse_conllu, serialize_conllu
from .lexicon import BilingualLexicon, dump_lexicon
from .model import PAIR, TAGGING, PairExample, TaggingExample

__all__ = ["ORDERS", "BASE_VOCAB", "ToyLanguageSpec", "ToyCorpus", "make_language", "default_languages",
           "gen_corpus", "gen_lexicons", "families_of", "PAIR_LABELS", "TAG_LABELS",
           "render", "write_corpus", "read_corpus"]

PAIR_LABELS = ("none", "one", "both")
TAG_LABELS = ("O", "B-PER", "I-PER", "B-LOC", "I-LOC")

HEAD = "HEAD"

# Linear order of a head and its dependents, by dependency relation.
ORDERS: dict[str, dict[str, tuple[str, ...]]] = {
    "svo_pre": {
        "clause": ("nsubj", HEAD, "obj", "advmod", "obl", "punct"),
        "subj": ("amod", HEAD, "flat"),
        "obj": ("det", "amod", HEAD),
        "loc": ("case", HEAD),
    },
    "svo_post": {
        "clause": ("nsubj", HEAD, "obj", "obl", "advmod", "punct"),
        "subj": (HEAD, "flat", "amod"),
        "obj": ("det", HEAD, "amod"),
        "loc": ("case", HEAD),
    },
    "sov_post": {
        "clause": ("nsubj", "obl", "obj", "advmod", HEAD, "punct"),
        "subj": (HEAD, "flat", "amod"),
        "obj": (HEAD, "amod", "det"),
        "loc": (HEAD, "case"),
    },
    "vso_post": {
        "clause": (HEAD, "nsubj", "obj", "advmod", "obl", "punct"),
        "subj": (HEAD, "flat", "amod"),
        "obj": ("det", HEAD, "amod"),
        "loc": ("case", HEAD),
    },
}

# (category, upos, size); names and places are shared across languages
BASE_VOCAB = (
    ("verb", "VERB", 8),
    ("noun", "NOUN", 12),
    ("adj_pos", "ADJ", 8),
    ("adj_neg", "ADJ", 8),
    ("det", "DET", 3),
    ("adv", "ADV", 4),
    ("adp", "ADP", 3),
    ("name", "PROPN", 12),
    ("surname", "PROPN", 8),
    ("place", "PROPN", 6),
    ("punct", "PUNCT", 1),
)
SHARED_CATEGORIES = ("name", "surname", "place", "punct")

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def base_words() -> list[tuple[str, str]]:
    """(base word, UPOS) pairs, e.g. ``("adj_pos.3", "ADJ")``."""
    return [(f"{cat}.{i}", upos) for cat, upos, size in BASE_VOCAB for i in range(size)]


@dataclass(frozen=True)
class ToyLanguageSpec:
    code: str
    family: str
    lexicon: Mapping[str, str]
    order: str = "svo_pre"

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"unknown word-order rule {self.order!r}")
        words = [w for w, _ in base_words()]
        missing = [w for w in words if w not in self.lexicon]
        if missing:
            raise ValueError(f"{self.code}: lexicon misses base words {missing[:3]}...")
        forms = [self.lexicon[w] for w in words]
        if len(set(forms)) != len(forms):
            raise ValueError(f"{self.code}: lexicon is not a bijection")
        for template in ORDERS[self.order].values():
            if list(template).count(HEAD) != 1 or len(set(template)) != len(template):
                raise ValueError(f"{self.code}: inconsistent order template {template}")


def _pseudo_word(rng, taken):
    while True:
        n = int(rng.integers(2, 4))
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n))
        if w not in taken:
            taken.add(w)
            return w


def _shared_forms(seed=0):
    rng = np.random.default_rng([seed, 7])
    taken: set[str] = set()
    out = {}
    for w, upos in base_words():
        cat = w.split(".")[0]
        if cat == "punct":
            out[w] = "."
        elif cat in SHARED_CATEGORIES:
            out[w] = _pseudo_word(rng, taken).capitalize()
    return out


def make_language(code: str, family: str, order: str, seed: int = 0,
                  taken: set[str] | None = None) -> ToyLanguageSpec:
    """A language with fresh pseudo-words for every translatable base word."""
    digest = sum((i + 1) * ord(c) for i, c in enumerate(code))
    rng = np.random.default_rng([seed, digest])
    taken = set() if taken is None else taken
    lex = dict(_shared_forms(seed))
    for w, _ in base_words():
        if w not in lex:
            lex[w] = _pseudo_word(rng, taken)
    return ToyLanguageSpec(code=code, family=family, lexicon=lex, order=order)


DEFAULT_LANGUAGES = (
    ("en", "IE.Germanic", "svo_pre"),
    ("de", "IE.Germanic", "svo_pre"),
    ("fr", "IE.Romance", "svo_post"),
    ("es", "IE.Romance", "svo_post"),
    ("tr", "Altaic", "sov_post"),
    ("ar", "Afro-asiatic", "vso_post"),
)


def default_languages(codes: Sequence[str] = ("en", "fr", "tr"), seed: int = 0) -> list[ToyLanguageSpec]:
    table = {c: (f, o) for c, f, o in DEFAULT_LANGUAGES}
    taken: set[str] = set()
    specs = []
    for code in codes:
        family, order = table[code]
        specs.append(make_language(code, family, order, seed=seed, taken=taken))
    return specs


def families_of(specs: Sequence[ToyLanguageSpec]) -> dict[str, str]:
    return {s.code: s.family for s in specs}


# -- base clauses ---------------------------------------------------------

@dataclass
class Node:
    word: str
    upos: str
    deprel: str
    role: str = ""
    entity: str = ""
    children: list["Node"] = field(default_factory=list)


def _pick(rng, cat):
    size = next(s for c, _, s in BASE_VOCAB if c == cat)
    return f"{cat}.{int(rng.integers(size))}"


def _adj(rng, positive):
    return Node(_pick(rng, "adj_pos" if positive else "adj_neg"), "ADJ", "amod")


def base_clause(rng, subj_positive: bool) -> Node:
    subj = Node(_pick(rng, "name"), "PROPN", "nsubj", role="subj", entity="PER")
    if rng.random() < 0.4:
        subj.children.append(Node(_pick(rng, "surname"), "PROPN", "flat", entity="PER"))
    subj.children.append(_adj(rng, subj_positive))

    obj = Node(_pick(rng, "noun"), "NOUN", "obj", role="obj")
    if rng.random() < 0.6:
        obj.children.append(Node(_pick(rng, "det"), "DET", "det"))
    obj.children.append(_adj(rng, rng.random() < 0.5))

    root = Node(_pick(rng, "verb"), "VERB", "root", role="clause")
    root.children += [subj, obj]
    if rng.random() < 0.4:
        root.children.append(Node(_pick(rng, "adv"), "ADV", "advmod"))
    if rng.random() < 0.4:
        loc = Node(_pick(rng, "place"), "PROPN", "obl", role="loc", entity="LOC")
        loc.children.append(Node(_pick(rng, "adp"), "ADP", "case"))
        root.children.append(loc)
    root.children.append(Node("punct.0", "PUNCT", "punct"))
    return root


def _key(node: Node):
    return (node.word, node.deprel, tuple(_key(c) for c in node.children))


def render(base: Node, spec: ToyLanguageSpec, sent_id: str) -> Sentence:
    """Linearize a base clause with the language's templates and word list."""
    order = ORDERS[spec.order]
    seq: list[tuple[Node, Node | None]] = []

    def walk(node, parent):
        template = order.get(node.role)
        if template is None:
            seq.append((node, parent))
            for c in node.children:
                walk(c, node)
            return
        by_rel: dict[str, list[Node]] = {}
        for c in node.children:
            by_rel.setdefault(c.deprel, []).append(c)
        for slot in template:
            if slot == HEAD:
                seq.append((node, parent))
            else:
                for c in by_rel.get(slot, []):
                    walk(c, node)

    walk(base, None)
    position = {id(n): i + 1 for i, (n, _) in enumerate(seq)}
    tags = ["O"] * len(seq)
    for node, _ in seq:
        if node.entity and node.role:
            span = [position[id(node)]] + [position[id(c)] for c in node.children if c.entity]
            for j, p in enumerate(sorted(span)):
                tags[p - 1] = f"{'B' if j == 0 else 'I'}-{node.entity}"

    tokens = []
    for i, (node, parent) in enumerate(seq, start=1):
        misc = (("Entity", tags[i - 1]),) if tags[i - 1] != "O" else ()
        tokens.append(Token(
            index=i, form=spec.lexicon[node.word], upos=node.upos,
            head=0 if parent is None else position[id(parent)], deprel=node.deprel,
            lang=spec.code, is_entity=tags[i - 1] != "O", misc=misc,
        ))
    return Sentence(id=sent_id, tokens=tuple(tokens), lang=spec.code)


# -- corpora ----------------------------------------------------------------

@dataclass
class ToyCorpus:
    task: str
    languages: list[str]
    # language -> split -> examples; index i is parallel across languages
    splits: dict[str, dict[str, list]]
    label_names: tuple[str, ...]
    families: dict[str, str]

    def examples(self, lang: str, split: str) -> list:
        return self.splits[lang][split]


def _sample_pair_bases(rng, priors):
    label = int(rng.choice(3, p=priors))
    if label == 1:
        first = bool(rng.random() < 0.5)
        pol = (first, not first)
    else:
        pol = (label == 2, label == 2)
    return label, base_clause(rng, pol[0]), base_clause(rng, pol[1])


def gen_corpus(specs: Sequence[ToyLanguageSpec], sizes: Mapping[str, int], task: str = PAIR,
               seed: int = 0, priors: Sequence[float] = (1 / 3, 1 / 3, 1 / 3)) -> ToyCorpus:
    """Render the same base examples in every language.

    ``sizes`` maps split names (e.g. train/dev/test) to example counts.
    Base examples are never repeated, within or across splits.
    """
    if len(specs) < 2:
        raise ValueError("need at least two language specs")
    if any(n < 1 for n in sizes.values()):
        raise ValueError("split sizes must be >= 1")
    priors = np.asarray(priors, dtype=float)
    priors = priors / priors.sum()
    rng = np.random.default_rng(seed)
    seen = set()
    splits = {s.code: {} for s in specs}
    for split, n in sizes.items():
        rows = []
        while len(rows) < n:
            if task == PAIR:
                label, a, b = _sample_pair_bases(rng, priors)
                key = (_key(a), _key(b))
                item = (label, a, b)
            else:
                a = base_clause(rng, bool(rng.random() < 0.5))
                key = _key(a)
                item = (None, a)
            if key in seen:
                continue
            seen.add(key)
            rows.append(item)
        for spec in specs:
            out = []
            for i, item in enumerate(rows):
                eid = f"{split}-{i:05d}"
                if task == PAIR:
                    label, a, b = item
                    out.append(PairExample(
                        f"{eid}", render(a, spec, f"{spec.code}-{eid}-a"), render(b, spec, f"{spec.code}-{eid}-b"),
                        label))
                else:
                    out.append(TaggingExample(eid, render(item[1], spec, f"{spec.code}-{eid}")))
            splits[spec.code][split] = out
    labels = PAIR_LABELS if task == PAIR else TAG_LABELS
    return ToyCorpus(task, [s.code for s in specs], splits, labels, families_of(specs))


def gen_lexicons(specs: Sequence[ToyLanguageSpec], noise: float = 0.0, seed: int = 0
                 ) -> dict[tuple[str, str], BilingualLexicon]:
    """Lexicons for every ordered language pair, keyed ``(source, target)``.

    With ``noise`` = 0 each lexicon is the exact bijection through the
    shared base words.  A positive ``noise`` gives that fraction of the
    translatable entries one extra, wrong translation of the same category
    (listed second), mimicking the ambiguity of real dictionaries.
    """
    words = [w for w, _ in base_words()]
    by_cat: dict[str, list[str]] = {}
    for w in words:
        by_cat.setdefault(w.split(".")[0].replace("_pos", "").replace("_neg", ""), []).append(w)
    out = {}
    for a in specs:
        for b in specs:
            if a.code == b.code:
                continue
            rng = np.random.default_rng([seed, len(out)])
            entries = {}
            for w in words:
                targets = [b.lexicon[w]]
                cat = w.split(".")[0]
                if noise > 0 and cat not in SHARED_CATEGORIES and rng.random() < noise:
                    pool = [x for x in by_cat[cat.replace("_pos", "").replace("_neg", "")] if x != w]
                    if pool:
                        targets.append(b.lexicon[pool[int(rng.integers(len(pool)))]])
                src = a.lexicon[w]
                entries[src] = tuple(targets)
            out[(a.code, b.code)] = BilingualLexicon(a.code, b.code, entries)
    return out


# -- files ----------------------------------------------------------------

def write_corpus(corpus: ToyCorpus, lexicons, outdir) -> list[str]:
    """CoNLL-U per language/split, a JSON label sidecar and MUSE lexicon files."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    meta = {"task": corpus.task, "languages": corpus.languages, "labels": list(corpus.label_names),
            "families": corpus.families, "splits": {}}
    for lang in corpus.languages:
        for split, examples in corpus.splits[lang].items():
            sents = [s for e in examples for s in e.sentences]
            path = outdir / f"{lang}.{split}.conllu"
            path.write_bytes(serialize_conllu(sents))
            written.append(path.name)
            if corpus.task == PAIR:
                meta["splits"].setdefault(split, [])
                if lang == corpus.languages[0]:
                    meta["splits"][split] = [{"id": e.id, "label": e.label} for e in examples]
            else:
                meta["splits"].setdefault(split, [{"id": e.id} for e in examples])
    (outdir / "labels.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    written.append("labels.json")
    for (a, b), lex in sorted(lexicons.items()):
        path = outdir / f"lexicon.{a}-{b}.txt"
        path.write_bytes(dump_lexicon(lex))
        written.append(path.name)
    return written


def read_corpus(indir) -> ToyCorpus:
    """Inverse of :func:`write_corpus` for the corpus part."""
    from pathlib import Path

    indir = Path(indir)
    meta = json.loads((indir / "labels.json").read_text(encoding="utf-8"))
    splits: dict[str, dict[str, list]] = {}
    for lang in meta["languages"]:
        splits[lang] = {}
        for split, rows in meta["splits"].items():
            sents = parse_conllu((indir / f"{lang}.{split}.conllu").read_bytes(), lang=lang)
            if meta["task"] == PAIR:
                splits[lang][split] = [PairExample(r["id"], sents[2 * i], sents[2 * i + 1], r["label"])
                                       for i, r in enumerate(rows)]
            else:
                splits[lang][split] = [TaggingExample(r["id"], s) for r, s in zip(rows, sents)]
    return ToyCorpus(meta["task"], meta["languages"], splits, tuple(meta["labels"]), meta["families"])
