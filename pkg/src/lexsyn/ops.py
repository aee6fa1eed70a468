"""Forward/backward pairs for the layers used by the GAT and the encoder.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache.  Arrays are float64 with the
batch as the leading axis.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def additive_mask(mask: np.ndarray) -> np.ndarray:
    """0 where allowed, -inf elsewhere."""
    return np.where(mask, 0.0, -np.inf)


def masked_softmax(scores: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Softmax over the last axis restricted to ``mask``; masked entries are exactly 0.

    ``mask`` is boolean or an additive float mask from :func:`additive_mask`.
    Every row needs at least one allowed entry.
    """
    if mask is not None:
        if mask.dtype == bool:
            mask = additive_mask(mask)
        scores = scores + mask
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores, out=scores)
    e /= e.sum(axis=-1, keepdims=True)
    return e


def attention_forward(q, k, v, mask):
    """Scaled dot-product attention.

    q, k, v: (..., n, d); mask broadcastable to (..., n, n).
    """
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = np.matmul(q, np.swapaxes(k, -1, -2)) * scale
    a = masked_softmax(scores, mask)
    out = np.matmul(a, v)
    return out, (q, k, v, a, scale)


def attention_backward(dout, cache):
    q, k, v, a, scale = cache
    da = np.matmul(dout, np.swapaxes(v, -1, -2))
    dv = np.matmul(np.swapaxes(a, -1, -2), dout)
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True))
    ds *= scale
    dq = np.matmul(ds, k)
    dk = np.matmul(np.swapaxes(ds, -1, -2), q)
    return dq, dk, dv


def layernorm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def layernorm_backward(dy, cache):
    xhat, rstd, g = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def gelu_forward(x):
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy, cache):
    x, t = cache
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * (x * x))
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def split_heads(x, h):
    """(B, n, D) -> (B, h, n, D/h)."""
    b, n, d = x.shape
    return x.reshape(b, n, h, d // h).transpose(0, 2, 1, 3)


def merge_heads(x):
    """(B, h, n, dh) -> (B, n, h*dh)."""
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def sum_rows(shape, ids, grad):
    """Scatter-add ``grad`` rows into a zero table of ``shape`` at ``ids``."""
    out = np.zeros(shape)
    np.add.at(out, ids.reshape(-1), grad.reshape(-1, shape[-1]))
    return out
