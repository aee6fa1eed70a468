"""
From a parsed sentence to a syntax mask
=======================================

A parallel toy corpus, one code-switched sentence, and the tree-distance
mask the graph attention network sees.
"""

import numpy as np

from lexsyn.codeswitch import RANDOM_LANGUAGES, CodeSwitchPolicy, augment_sentence
from lexsyn.conllu_io import serialize_conllu, validate_tree
from lexsyn.synth_corpus import default_languages, gen_corpus, gen_lexicons
from lexsyn.syntax_graph import attach_cls, build_mask, tree_distances

# three toy languages with their own words and word orders
specs = default_languages(("en", "fr", "tr"))
corpus = gen_corpus(specs, {"train": 5}, seed=0)
lexicons = gen_lexicons(specs)

# the same example rendered in each language
for lang in corpus.languages:
    ex = corpus.examples(lang, "train")[0]
    print(lang, " ".join(ex.s1.forms), "|", " ".join(ex.s2.forms), "label", ex.label)

# replace about half of the English words by French or Turkish translations
s = corpus.examples("en", "train")[0].s1
policy = CodeSwitchPolicy(alpha=0.5, mode=RANDOM_LANGUAGES, candidate_langs=("fr", "tr"), seed=1)
lex = {t: lexicons[("en", t)] for t in ("fr", "tr")}
switched, report = augment_sentence(s, lex, policy, corpus.families, np.random.default_rng(1), "fr")
print(serialize_conllu([switched]).decode())
print("selected", report.selected, "languages", report.languages_used)

# the tree is untouched, so the distances and the mask are too
dist = tree_distances(attach_cls(validate_tree(switched)))
print(dist.astype(int))
print(build_mask(dist, 2).astype(int))
