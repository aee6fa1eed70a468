"""Small pre-norm transformer encoder with syntax-biased attention.

In every biased layer ``l`` the queries and keys receive an additive term
computed from the GAT output ``Y``::

    Q' = LN(H) W_q + Y B_q[l]
    K' = LN(H) W_k + Y B_k[l]
    O  = softmax(Q' K'^T / sqrt(d_head)) V

``B_q[l]`` and ``B_k[l]`` map the GAT width to the full model width; the
result is split into heads together with ``Q`` and ``K``.  Attention inside
the encoder is unmasked apart from padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .gat import xavier

__all__ = ["EncoderConfig", "init_encoder_params", "init_bias_params", "biased_attention",
           "encoder_forward", "encoder_backward", "layer_is_biased"]


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    num_layers: int = 2
    num_heads: int = 4
    model_dim: int = 32
    ffn_dim: int = 64
    max_seq_len: int = 128
    bias_enabled: bool = True
    # half-open range of biased layers; None biases every layer
    bias_layers: tuple[int, int] | None = None

    def __post_init__(self):
        if self.model_dim % self.num_heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.num_heads} heads")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")


def layer_is_biased(config: EncoderConfig, layer: int) -> bool:
    if not config.bias_enabled:
        return False
    if config.bias_layers is None:
        return True
    lo, hi = config.bias_layers
    return lo <= layer < hi


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    D, F, L = config.model_dim, config.ffn_dim, config.num_layers
    p = {
        "enc.E": rng.normal(0.0, 0.02, size=(config.vocab_size, D)),
        "enc.P": rng.normal(0.0, 0.02, size=(config.max_seq_len, D)),
    }
    for name in ("W_q", "W_k", "W_v", "W_o"):
        p[f"enc.{name}"] = xavier(rng, (L, D, D), D, D)
    p["enc.b_o"] = np.zeros((L, D))
    p["enc.ln1_g"] = np.ones((L, D))
    p["enc.ln1_b"] = np.zeros((L, D))
    p["enc.ln2_g"] = np.ones((L, D))
    p["enc.ln2_b"] = np.zeros((L, D))
    p["enc.W_1"] = xavier(rng, (L, D, F), D, F)
    p["enc.b_1"] = np.zeros((L, F))
    p["enc.W_2"] = xavier(rng, (L, F, D), F, D)
    p["enc.b_2"] = np.zeros((L, D))
    p["enc.lnf_g"] = np.ones(D)
    p["enc.lnf_b"] = np.zeros(D)
    return p


def init_bias_params(config: EncoderConfig, gat_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    L, D = config.num_layers, config.model_dim
    return {
        "bias.W_Q": xavier(rng, (L, gat_dim, D), gat_dim, D),
        "bias.W_K": xavier(rng, (L, gat_dim, D), gat_dim, D),
    }


def biased_attention(params, config: EncoderConfig, layer: int, A, Y=None, key_mask=None):
    """Attention sub-layer of ``layer`` on normalized input ``A`` (B, n, D).

    Returns the projected output and a cache for the backward pass.  ``Y``
    of None, or a layer outside the biased range, gives the plain layer.
    """
    l = layer
    q = A @ params["enc.W_q"][l]
    k = A @ params["enc.W_k"][l]
    v = A @ params["enc.W_v"][l]
    use_bias = Y is not None and layer_is_biased(config, l)
    if use_bias:
        if Y.shape[:-1] != A.shape[:-1]:
            raise ValueError(f"GAT output rows {Y.shape[:-1]} do not match encoder rows {A.shape[:-1]}")
        q = q + Y @ params["bias.W_Q"][l]
        k = k + Y @ params["bias.W_K"][l]
    h = config.num_heads
    O, att = ops.attention_forward(ops.split_heads(q, h), ops.split_heads(k, h),
                                   ops.split_heads(v, h), key_mask)
    merged = ops.merge_heads(O)
    out = merged @ params["enc.W_o"][l] + params["enc.b_o"][l]
    return out, (A, merged, att, use_bias)


def _outer(a, b):
    """Sum over batch and positions of a_i^T b_i."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _biased_attention_backward(params, config, l, dout, cache, Y, grads):
    A, merged, att, use_bias = cache
    h = config.num_heads
    grads["enc.W_o"][l] += _outer(merged, dout)
    grads["enc.b_o"][l] += dout.sum(axis=(0, 1))
    dmerged = dout @ params["enc.W_o"][l].T
    dq, dk, dv = ops.attention_backward(ops.split_heads(dmerged, h), att)
    dq, dk, dv = ops.merge_heads(dq), ops.merge_heads(dk), ops.merge_heads(dv)
    grads["enc.W_q"][l] += _outer(A, dq)
    grads["enc.W_k"][l] += _outer(A, dk)
    grads["enc.W_v"][l] += _outer(A, dv)
    dA = dq @ params["enc.W_q"][l].T + dk @ params["enc.W_k"][l].T + dv @ params["enc.W_v"][l].T
    dY = None
    if use_bias:
        grads["bias.W_Q"][l] += _outer(Y, dq)
        grads["bias.W_K"][l] += _outer(Y, dk)
        dY = dq @ params["bias.W_Q"][l].T + dk @ params["bias.W_K"][l].T
    return dA, dY


def encoder_forward(params, config: EncoderConfig, token_ids, valid=None, Y=None):
    """Final hidden states (B, n, D) and a cache.

    ``valid`` marks real (non-padding) positions; padding keys are never
    attended.  ``Y`` is the GAT output aligned row-for-row with the input.
    """
    token_ids = np.asarray(token_ids)
    B, n = token_ids.shape
    if n > config.max_seq_len:
        raise ValueError(f"sequence length {n} exceeds max_seq_len {config.max_seq_len}")
    if not config.bias_enabled:
        Y = None
    key_mask = None if valid is None else ops.additive_mask(np.asarray(valid, dtype=bool)[:, None, None, :])

    h = params["enc.E"][token_ids] + params["enc.P"][:n]
    layers = []
    for l in range(config.num_layers):
        a, ln1 = ops.layernorm_forward(h, params["enc.ln1_g"][l], params["enc.ln1_b"][l])
        o, attc = biased_attention(params, config, l, a, Y, key_mask)
        h = h + o
        c, ln2 = ops.layernorm_forward(h, params["enc.ln2_g"][l], params["enc.ln2_b"][l])
        z = c @ params["enc.W_1"][l] + params["enc.b_1"][l]
        gz, gc = ops.gelu_forward(z)
        h = h + gz @ params["enc.W_2"][l] + params["enc.b_2"][l]
        layers.append((ln1, attc, ln2, c, gc, gz))
    out, lnf = ops.layernorm_forward(h, params["enc.lnf_g"], params["enc.lnf_b"])
    return out, (token_ids, Y, layers, lnf)


def encoder_backward(params, config: EncoderConfig, dout, cache):
    """Parameter gradients (``enc.*`` and ``bias.*``) and the gradient w.r.t. ``Y``."""
    token_ids, Y, layers, lnf = cache
    grads = {k: np.zeros_like(v) for k, v in params.items() if k.startswith(("enc.", "bias."))}
    dY = None if Y is None else np.zeros_like(Y)

    dh, grads["enc.lnf_g"], grads["enc.lnf_b"] = ops.layernorm_backward(dout, lnf)
    for l in reversed(range(config.num_layers)):
        ln1, attc, ln2, c, gc, gz = layers[l]
        grads["enc.W_2"][l] += _outer(gz, dh)
        grads["enc.b_2"][l] += dh.sum(axis=(0, 1))
        dz = ops.gelu_backward(dh @ params["enc.W_2"][l].T, gc)
        grads["enc.W_1"][l] += _outer(c, dz)
        grads["enc.b_1"][l] += dz.sum(axis=(0, 1))
        dc = dz @ params["enc.W_1"][l].T
        dx, dg, db = ops.layernorm_backward(dc, ln2)
        grads["enc.ln2_g"][l] += dg
        grads["enc.ln2_b"][l] += db
        dh = dh + dx

        dA, dYl = _biased_attention_backward(params, config, l, dh, attc, Y, grads)
        dx, dg, db = ops.layernorm_backward(dA, ln1)
        grads["enc.ln1_g"][l] += dg
        grads["enc.ln1_b"][l] += db
        dh = dh + dx
        if dYl is not None:
            dY += dYl

    n = token_ids.shape[1]
    grads["enc.E"] = ops.sum_rows(params["enc.E"].shape, token_ids, dh)
    dP = np.zeros_like(params["enc.P"])
    dP[:n] = dh.sum(axis=0)
    grads["enc.P"] = dP
    return grads, dY
