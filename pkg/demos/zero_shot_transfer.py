"""
Zero-shot transfer on the toy corpus
====================================

Train on English only, with and without syntax bias and code-switching,
then score French and Turkish.  Takes about a minute.
"""

import numpy as np

from lexsyn.eval_analysis import transfer_matrix
from lexsyn.experiments import VARIANTS, run_variant, toy_setup

setup = toy_setup(n_train=1000, n_test=300)

runs = {}
for name, (bias, cs) in VARIANTS.items():
    runs[name] = run_variant(setup, bias, 0.5 if cs else 0.0, seed=0, epochs=6, keep_model=True, name=name)
    r = runs[name]
    sims = np.mean(list(r.similarity.values()))
    print(f"{name:5s}", {k: round(v, 3) for k, v in r.scores.items()}, f"centroid cosine {sims:.3f}")

# generalized transfer: first and second sentence from any two languages
tests = {l: setup.corpus.examples(l, "test") for l in setup.corpus.languages}
print(transfer_matrix(runs["full"].model, tests).to_csv())
