"""Graph attention network over dependency-tree masks.

Each layer runs ``k`` heads of masked self-attention in which one
projection serves as both query and key, and concatenates the head
outputs.  There is no feed-forward sub-layer, no residual connection, no
output projection and no positional term: token order only enters through
the mask, which is built from tree distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .syntax_graph import DEFAULT_DELTA, SyntaxGraph, build_mask, tree_distances

__all__ = ["GATConfig", "init_gat_params", "embed_tokens", "masked_attention_head",
           "gat_forward", "gat_backward", "gat_mask"]


@dataclass(frozen=True)
class GATConfig:
    vocab_size: int
    pos_tag_count: int
    num_layers: int = 4
    heads_per_layer: int = 4
    model_dim: int = 32
    mask_delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.model_dim % self.heads_per_layer:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.heads_per_layer} heads")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads_per_layer


def xavier(rng, shape, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_gat_params(config: GATConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    D, L, k, dh = config.model_dim, config.num_layers, config.heads_per_layer, config.head_dim
    return {
        "gat.W_c": rng.normal(0.0, 0.02, size=(config.vocab_size, D)),
        "gat.W_pos": rng.normal(0.0, 0.02, size=(config.pos_tag_count, D)),
        "gat.W_T": xavier(rng, (L, k, D, dh), D, dh),
        "gat.W_V": xavier(rng, (L, k, D, dh), D, dh),
    }


def embed_tokens(params, token_ids, pos_ids) -> np.ndarray:
    """Row of the token table plus row of the POS table, per node."""
    W_c, W_pos = params["gat.W_c"], params["gat.W_pos"]
    token_ids = np.asarray(token_ids)
    pos_ids = np.asarray(pos_ids)
    if token_ids.size and (token_ids.min() < 0 or token_ids.max() >= W_c.shape[0]):
        raise IndexError(f"token id out of range [0, {W_c.shape[0]})")
    if pos_ids.size and (pos_ids.min() < 0 or pos_ids.max() >= W_pos.shape[0]):
        raise IndexError(f"POS id out of range [0, {W_pos.shape[0]})")
    return W_c[token_ids] + W_pos[pos_ids]


def masked_attention_head(H, W_T, W_V, M) -> np.ndarray:
    """One head on an unbatched (n, D) input with an (n, n) boolean mask."""
    M = np.asarray(M, dtype=bool)
    if not M.diagonal().all():
        raise ValueError("mask diagonal must be all True")
    T = H @ W_T
    V = H @ W_V
    out, _ = ops.attention_forward(T, T, V, M)
    return out


def _stack(W):
    """(k, D, dh) per-head projections -> (D, k*dh), heads side by side."""
    return W.transpose(1, 0, 2).reshape(W.shape[1], -1)


def _unstack(W, k):
    D = W.shape[0]
    return W.reshape(D, k, -1).transpose(1, 0, 2)


def gat_mask(graph: SyntaxGraph, delta=DEFAULT_DELTA) -> np.ndarray:
    return build_mask(tree_distances(graph), delta)


def gat_forward(params, token_ids, pos_ids, mask):
    """Run all layers; returns ``(Y, cache)``.

    Inputs are batched (B, n) ids with a (B, n, n) mask, or unbatched
    (n,) ids with an (n, n) mask, in which case Y is (n, D).
    """
    token_ids = np.asarray(token_ids)
    unbatched = token_ids.ndim == 1
    if unbatched:
        token_ids = token_ids[None]
        pos_ids = np.asarray(pos_ids)[None]
        mask = np.asarray(mask)[None]
    W_T, W_V = params["gat.W_T"], params["gat.W_V"]
    mask4 = ops.additive_mask(np.asarray(mask, dtype=bool)[:, None])

    H = embed_tokens(params, token_ids, pos_ids)
    layers = []
    k = W_T.shape[1]
    for l in range(W_T.shape[0]):
        T = ops.split_heads(H @ _stack(W_T[l]), k)
        V = ops.split_heads(H @ _stack(W_V[l]), k)
        O, att = ops.attention_forward(T, T, V, mask4)
        layers.append((H, att))
        H = ops.merge_heads(O)
    cache = (token_ids, pos_ids, layers, unbatched)
    return (H[0] if unbatched else H), cache


def gat_backward(params, dY, cache) -> dict[str, np.ndarray]:
    token_ids, pos_ids, layers, unbatched = cache
    if unbatched:
        dY = dY[None]
    W_T, W_V = params["gat.W_T"], params["gat.W_V"]
    dW_T = np.zeros_like(W_T)
    dW_V = np.zeros_like(W_V)
    dH = dY
    k = W_T.shape[1]
    for l in reversed(range(W_T.shape[0])):
        H_in, att = layers[l]
        dO = ops.split_heads(dH, k)
        dq, dk, dv = ops.attention_backward(dO, att)
        dT = ops.merge_heads(dq + dk)
        dv = ops.merge_heads(dv)
        flat = H_in.reshape(-1, H_in.shape[-1])
        dW_T[l] = _unstack(flat.T @ dT.reshape(-1, dT.shape[-1]), k)
        dW_V[l] = _unstack(flat.T @ dv.reshape(-1, dv.shape[-1]), k)
        dH = dT @ _stack(W_T[l]).T + dv @ _stack(W_V[l]).T
    return {
        "gat.W_c": ops.sum_rows(params["gat.W_c"].shape, token_ids, dH),
        "gat.W_pos": ops.sum_rows(params["gat.W_pos"].shape, pos_ids, dH),
        "gat.W_T": dW_T,
        "gat.W_V": dW_V,
    }
