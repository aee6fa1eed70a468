"""Metrics, cross-lingual transfer matrices and language-centroid similarity."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import PAIR, LSModel, PairExample

__all__ = ["accuracy", "span_f1_iob2", "iob2_spans", "exact_match", "token_accuracy",
           "LanguageCentroid", "language_centroid", "cosine_similarity", "centroid_similarities",
           "TransferMatrix", "transfer_matrix", "evaluate", "MissingTestSet"]

_TAG = re.compile(r"^(?:O|([BI])-(\S+))$")


class MissingTestSet(KeyError):
    pass


def accuracy(preds: Sequence, golds: Sequence) -> float:
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(golds)} gold labels")
    if not golds:
        raise ValueError("accuracy of an empty set")
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def token_accuracy(pred_seqs: Sequence[Sequence], gold_seqs: Sequence[Sequence]) -> float:
    """Fraction of tokens whose predicted tag equals the gold tag."""
    if len(pred_seqs) != len(gold_seqs):
        raise ValueError("length mismatch")
    flat_p, flat_g = [], []
    for p, g in zip(pred_seqs, gold_seqs):
        if len(p) != len(g):
            raise ValueError("tag sequence length mismatch")
        flat_p.extend(p)
        flat_g.extend(g)
    return accuracy(flat_p, flat_g)


def iob2_spans(tags: Sequence[str]) -> set[tuple[int, int, str]]:
    """Spans ``(start, end_exclusive, type)`` of an IOB2 sequence.

    An ``I-X`` that does not continue a span of type X opens a new one.
    """
    spans = set()
    start, kind = None, None
    for i, tag in enumerate(tags):
        m = _TAG.match(tag)
        if m is None:
            raise ValueError(f"malformed IOB2 tag {tag!r} at position {i}")
        prefix, typ = m.groups()
        if prefix == "I" and kind == typ:
            continue
        if kind is not None:
            spans.add((start, i, kind))
            start, kind = None, None
        if prefix is not None:
            start, kind = i, typ
    if kind is not None:
        spans.add((start, len(tags), kind))
    return spans


def span_f1_iob2(pred: Sequence, gold: Sequence) -> tuple[float, float, float]:
    """Precision, recall and F1 over exact (boundaries, type) span matches.

    Accepts one tag sequence or a list of sequences.  Precision is 0 when
    nothing is predicted and recall is 0 when there is no gold span.
    """
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if pred and not isinstance(pred[0], str):
        pairs = list(zip(pred, gold))
    else:
        pairs = [(pred, gold)]
    tp = n_pred = n_gold = 0
    for k, (p, g) in enumerate(pairs):
        if len(p) != len(g):
            raise ValueError(f"sequence {k}: length mismatch {len(p)} vs {len(g)}")
        ps, gs = iob2_spans(p), iob2_spans(g)
        tp += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def exact_match(pred: str, gold: str) -> int:
    return int(pred.strip() == gold.strip())


@dataclass(frozen=True)
class LanguageCentroid:
    lang: str
    vector: np.ndarray
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("centroid needs at least one vector")


def language_centroid(vectors, lang: str = "") -> LanguageCentroid:
    v = np.asarray(vectors, dtype=float)
    if v.ndim == 1:
        v = v[None]
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("expected a non-empty (count, dim) array of vectors")
    return LanguageCentroid(lang, v.mean(axis=0), v.shape[0])


def cosine_similarity(a, b) -> float:
    a = np.asarray(getattr(a, "vector", a), dtype=float)
    b = np.asarray(getattr(b, "vector", b), dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity with a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def centroid_similarities(model: LSModel, test_sets: Mapping[str, Sequence], source: str) -> dict[str, float]:
    """Cosine between the source-language centroid and each other language's.

    Each example contributes the final [CLS] row of its full model input.
    """
    cents = {lang: language_centroid(model.cls_vectors(list(exs)), lang) for lang, exs in test_sets.items()}
    if source not in cents:
        raise MissingTestSet(source)
    return {lang: cosine_similarity(cents[source], c) for lang, c in cents.items() if lang != source}


def evaluate(model: LSModel, examples: Sequence, metric: str | None = None) -> float:
    """Score ``model`` on ``examples``: accuracy for pairs, span F1 for tagging by default."""
    examples = list(examples)
    preds = model.predict(examples)
    if metric is None:
        metric = "accuracy" if model.task == PAIR else "span_f1"
    if model.task == PAIR:
        if metric != "accuracy":
            raise ValueError(f"metric {metric!r} not available for pair tasks")
        return accuracy(preds, [e.label for e in examples])
    golds = [e.tags for e in examples]
    if metric == "span_f1":
        return span_f1_iob2(preds, golds)[2]
    if metric == "token_accuracy":
        return token_accuracy(preds, golds)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class TransferMatrix:
    """``values[i, j]``: score with row language ``rows[i]`` and column language ``cols[j]``.

    For pair tasks rows are first-sentence languages and columns
    second-sentence languages; single-sentence tasks have one row.
    """

    rows: list[str]
    cols: list[str]
    values: np.ndarray
    metric: str

    def get(self, row: str, col: str) -> float:
        return float(self.values[self.rows.index(row), self.cols.index(col)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.metric, *self.cols])
        for r, vals in zip(self.rows, self.values):
            w.writerow([r, *(f"{v:.6f}" for v in vals)])
        return buf.getvalue()


def _mix_pairs(first: Sequence[PairExample], second: Sequence[PairExample]) -> list[PairExample]:
    by_id = {e.id: e for e in second}
    out = []
    for e in first:
        other = by_id.get(e.id)
        if other is None:
            raise ValueError(f"example {e.id!r} has no parallel counterpart")
        if other.label != e.label:
            raise ValueError(f"parallel example {e.id!r} has mismatched labels")
        out.append(PairExample(e.id, e.s1, other.s2, e.label))
    return out


def transfer_matrix(model: LSModel, test_sets: Mapping[str, Sequence], langs: Sequence[str] | None = None,
                    metric: str | None = None) -> TransferMatrix:
    """Evaluate one model over every requested language (pairing).

    Pair tasks combine the first sentence of language ``a`` with the
    second sentence of the parallel example in language ``b``.
    """
    langs = list(test_sets) if langs is None else list(langs)
    missing = [l for l in langs if l not in test_sets]
    if missing:
        raise MissingTestSet(f"no test set for {', '.join(missing)}")
    name = metric or ("accuracy" if model.task == PAIR else "span_f1")
    if model.task == PAIR:
        vals = np.array([[evaluate(model, _mix_pairs(test_sets[a], test_sets[b]), name) for b in langs]
                         for a in langs])
        return TransferMatrix(langs, langs, vals, name)
    vals = np.array([[evaluate(model, test_sets[l], name) for l in langs]])
    return TransferMatrix([name], langs, vals, name)
