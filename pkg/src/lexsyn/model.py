"""The joint model: GAT + biased encoder + task head, with featurization.

A model input is the [CLS] node followed by the tokens of one sentence (or
of two sentences for pair tasks).  The same node sequence feeds the GAT,
whose mask comes from tree distances on the CLS-augmented graph, and the
encoder, whose positions are the sequence positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import ops
from .conllu_io import Sentence, validate_tree
from .encoder import EncoderConfig, encoder_backward, encoder_forward, init_bias_params, init_encoder_params
from .gat import GATConfig, gat_backward, gat_forward, init_gat_params
from .syntax_graph import attach_cls, build_mask, tree_distances

__all__ = ["UPOS_TAGS", "PAIR", "TAGGING", "Vocab", "PairExample", "TaggingExample",
           "Batch", "LSModel", "build_model", "collate", "PARAM_GROUPS", "param_group"]

PAIR = "pair_classification"
TAGGING = "sequence_labeling"

UPOS_TAGS = ("ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART",
             "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X")
PAD, CLS, UNK = "<pad>", "<cls>", "<unk>"

# Parameter groups used for gradient checks and update-norm reporting.
PARAM_GROUPS = {
    "W_c": ("gat.W_c",),
    "W_pos": ("gat.W_pos",),
    "gat_heads": ("gat.W_T", "gat.W_V"),
    "bias_Q": ("bias.W_Q",),
    "bias_K": ("bias.W_K",),
    "encoder": ("enc.",),
    "task_head": ("head.",),
}


def param_group(name: str) -> str:
    for group, prefixes in PARAM_GROUPS.items():
        if any(name == p or (p.endswith(".") and name.startswith(p)) for p in prefixes):
            return group
    raise KeyError(name)


@dataclass
class Vocab:
    items: list[str]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.items)}

    @classmethod
    def build(cls, words, specials=(PAD, CLS, UNK)) -> "Vocab":
        items = list(specials)
        seen = set(items)
        for w in words:
            if w not in seen:
                seen.add(w)
                items.append(w)
        return cls(items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, word: str) -> int:
        return self.index.get(word, self.index.get(UNK, 0))


def pos_vocab() -> Vocab:
    return Vocab([PAD, CLS, *UPOS_TAGS])


@dataclass(frozen=True)
class PairExample:
    id: str
    s1: Sentence
    s2: Sentence
    label: int

    @property
    def sentences(self):
        return (self.s1, self.s2)

    def with_sentences(self, s1, s2):
        return replace(self, s1=s1, s2=s2)


@dataclass(frozen=True)
class TaggingExample:
    id: str
    s1: Sentence

    @property
    def sentences(self):
        return (self.s1,)

    @property
    def tags(self) -> list[str]:
        return self.s1.entity_tags

    def with_sentences(self, s1):
        return replace(self, s1=s1)


@dataclass
class Batch:
    tok: np.ndarray      # (B, n) int
    pos: np.ndarray      # (B, n) int
    valid: np.ndarray    # (B, n) bool
    gat_mask: np.ndarray  # (B, n, n) bool
    labels: np.ndarray   # (B,) or (B, n) int, -1 = ignored

    def __len__(self):
        return self.tok.shape[0]


def example_distances(example) -> np.ndarray:
    """Tree distances over [CLS] + tokens; invariant under code-switching."""
    trees = [validate_tree(s) for s in example.sentences]
    graph = attach_cls(trees if len(trees) > 1 else trees[0], pair=len(trees) > 1)
    return tree_distances(graph)


def collate(rows, delta) -> Batch:
    """Pad (tok, pos, dist, labels) rows into a batch.

    Padding rows of the GAT mask keep their diagonal so every softmax row
    has an allowed entry; real nodes never see padding.
    """
    B = len(rows)
    n = max(len(r[0]) for r in rows)
    tok = np.zeros((B, n), dtype=np.int64)
    pos = np.zeros((B, n), dtype=np.int64)
    valid = np.zeros((B, n), dtype=bool)
    mask = np.zeros((B, n, n), dtype=bool)
    per_token = np.ndim(rows[0][3]) > 0
    labels = np.full((B, n), -1, dtype=np.int64) if per_token else np.zeros(B, dtype=np.int64)
    for b, (t, p, d, y) in enumerate(rows):
        m = len(t)
        tok[b, :m] = t
        pos[b, :m] = p
        valid[b, :m] = True
        mask[b, :m, :m] = build_mask(d, delta)
        if per_token:
            labels[b, :m] = y
        else:
            labels[b] = y
    idx = np.arange(n)
    mask[:, idx, idx] = True
    return Batch(tok, pos, valid, mask, labels)


@dataclass
class LSModel:
    """Parameters plus everything needed to turn examples into batches."""

    task: str
    labels: list[str]
    vocab: Vocab
    gat_config: GATConfig
    enc_config: EncoderConfig
    params: dict[str, np.ndarray]
    pos: Vocab = field(default_factory=pos_vocab)

    @property
    def uses_gat(self) -> bool:
        return self.enc_config.bias_enabled

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    # -- featurization ---------------------------------------------------

    def node_ids(self, sentences: Sequence[Sentence]):
        tok = [self.vocab[CLS]]
        pos = [self.pos[CLS]]
        for s in sentences:
            tok.extend(self.vocab[t.form] for t in s.tokens)
            pos.extend(self.pos[t.upos] if t.upos in self.pos.index else self.pos["X"] for t in s.tokens)
        return np.array(tok), np.array(pos)

    def example_labels(self, example):
        if self.task == PAIR:
            return example.label
        lab = {name: i for i, name in enumerate(self.labels)}
        return np.array([-1] + [lab[t] for t in example.tags])

    def featurize(self, example, distances=None):
        tok, pos = self.node_ids(example.sentences)
        d = example_distances(example) if distances is None else distances
        return tok, pos, d, self.example_labels(example)

    def batch(self, examples, distances=None) -> Batch:
        if distances is None:
            distances = [None] * len(examples)
        rows = [self.featurize(e, d) for e, d in zip(examples, distances)]
        return collate(rows, self.gat_config.mask_delta)

    # -- forward / backward ----------------------------------------------

    def forward(self, params, batch: Batch):
        """Logits and a cache; logits are (B, C) for pairs, (B, n, C) for tagging."""
        Y, gcache = None, None
        if self.uses_gat:
            Y, gcache = gat_forward(params, batch.tok, batch.pos, batch.gat_mask)
        H, ecache = encoder_forward(params, self.enc_config, batch.tok, batch.valid, Y)
        if self.task == PAIR:
            feats = H[:, 0]
        else:
            feats = H
        logits = feats @ params["head.W"] + params["head.b"]
        return logits, (H, feats, gcache, ecache)

    def hidden(self, batch: Batch, params=None) -> np.ndarray:
        params = self.params if params is None else params
        return self.forward(params, batch)[1][0]

    def loss(self, params, batch: Batch) -> float:
        logits, _ = self.forward(params, batch)
        return _ce(logits, batch.labels)[0]

    def loss_and_grads(self, params, batch: Batch):
        logits, (H, feats, gcache, ecache) = self.forward(params, batch)
        loss, dlogits = _ce(logits, batch.labels)
        grads = {
            "head.W": feats.reshape(-1, feats.shape[-1]).T @ dlogits.reshape(-1, dlogits.shape[-1]),
            "head.b": dlogits.reshape(-1, dlogits.shape[-1]).sum(axis=0),
        }
        dfeats = dlogits @ params["head.W"].T
        if self.task == PAIR:
            dH = np.zeros_like(H)
            dH[:, 0] = dfeats
        else:
            dH = dfeats
        egrads, dY = encoder_backward(params, self.enc_config, dH, ecache)
        grads.update(egrads)
        if gcache is not None:
            grads.update(gat_backward(params, dY, gcache))
        for k, v in params.items():
            if k not in grads:
                grads[k] = np.zeros_like(v)
        return loss, grads, logits

    def predict(self, examples, batch_size: int = 256, distances=None) -> list:
        """Class indices (pairs) or tag-string lists (tagging)."""
        out = []
        for i in range(0, len(examples), batch_size):
            chunk = examples[i:i + batch_size]
            dchunk = None if distances is None else distances[i:i + batch_size]
            batch = self.batch(chunk, dchunk)
            logits, _ = self.forward(self.params, batch)
            if self.task == PAIR:
                out.extend(int(c) for c in logits.argmax(axis=-1))
            else:
                pred = logits.argmax(axis=-1)
                for b, e in enumerate(chunk):
                    n = len(e.tags)
                    out.append([self.labels[c] for c in pred[b, 1:n + 1]])
        return out

    def cls_vectors(self, examples, batch_size: int = 256) -> np.ndarray:
        """Final-layer [CLS] rows, one per example."""
        rows = []
        for i in range(0, len(examples), batch_size):
            rows.append(self.hidden(self.batch(examples[i:i + batch_size]))[:, 0])
        return np.concatenate(rows)


def _ce(logits, labels):
    """Mean cross-entropy over entries with label >= 0, and its gradient."""
    C = logits.shape[-1]
    flat = logits.reshape(-1, C)
    y = np.asarray(labels).reshape(-1)
    keep = y >= 0
    count = int(keep.sum())
    if count == 0:
        return 0.0, np.zeros_like(logits)
    if y.max() >= C:
        raise ValueError(f"label {int(y.max())} out of range for {C} classes")
    logp = ops.log_softmax(flat)
    rows = np.nonzero(keep)[0]
    loss = -logp[rows, y[rows]].sum() / count
    d = np.exp(logp)
    d[rows, y[rows]] -= 1.0
    d[~keep] = 0.0
    return float(loss), (d / count).reshape(logits.shape)


def build_model(task: str, labels, words, gat_config: dict | None = None, enc_config: dict | None = None,
                seed: int = 0) -> LSModel:
    """Fresh model with a vocabulary over ``words`` and seeded parameters."""
    vocab = Vocab.build(words)
    pv = pos_vocab()
    gat_kw = dict(gat_config or {})
    enc_kw = dict(enc_config or {})
    gc = GATConfig(vocab_size=len(vocab), pos_tag_count=len(pv), **gat_kw)
    ec = EncoderConfig(vocab_size=len(vocab), **enc_kw)
    rng = np.random.default_rng(seed)
    params = {}
    params.update(init_gat_params(gc, rng))
    params.update(init_bias_params(ec, gc.model_dim, rng))
    params.update(init_encoder_params(ec, rng))
    D, C = ec.model_dim, len(labels)
    bound = np.sqrt(6.0 / (D + C))
    params["head.W"] = rng.uniform(-bound, bound, size=(D, C))
    params["head.b"] = np.zeros(C)
    return LSModel(task=task, labels=list(labels), vocab=vocab, gat_config=gc, enc_config=ec,
                   params=params, pos=pv)
