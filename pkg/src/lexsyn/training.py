"""Loss, AdamW, the joint training loop and finite-difference gradient checks."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ops
from .model import PAIR, TAGGING, LSModel, example_distances, param_group

__all__ = ["TrainingConfig", "AdamState", "TrainingDiverged", "cross_entropy_loss",
           "cross_entropy_grad", "adamw_step", "clip_by_global_norm", "train", "TrainResult",
           "grad_check", "accuracy_on"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 2e-5
    batch_size: int = 64
    epochs: int = 20
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 1.0
    seed: int = 0
    task: str = PAIR
    reaugment: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.task not in (PAIR, TAGGING):
            raise ValueError(f"unknown task {self.task!r}")


class TrainingDiverged(RuntimeError):
    pass


def cross_entropy_loss(logits, labels) -> float:
    """Mean of -log softmax(logits)[label] over rows (log-sum-exp with max subtraction)."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim == 1:
        logits, labels = logits[None], labels.reshape(1)
    C = logits.shape[-1]
    if labels.min() < 0 or labels.max() >= C:
        raise ValueError(f"labels must lie in [0, {C})")
    logp = ops.log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def cross_entropy_grad(logits, labels) -> np.ndarray:
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels).reshape(-1)
    g = np.exp(ops.log_softmax(logits))
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    refused: int = 0


def _decays(name: str) -> bool:
    # matrices and embedding tables only; layer-norm and bias vectors are exempt
    last = name.split(".")[-1]
    return last.startswith("W") or last in ("E", "P")


def adamw_step(params: dict, grads: dict, state: AdamState, config: TrainingConfig) -> bool:
    """One in-place AdamW update with decoupled weight decay.

    For each tensor, with t the new step count::

        m = b1*m + (1-b1)*g
        v = b2*v + (1-b2)*g**2
        p = p - lr*wd*p - lr * (m/(1-b1**t)) / (sqrt(v/(1-b2**t)) + eps)

    Decay applies to weight matrices and embedding tables.  If any gradient
    is non-finite nothing changes and False is returned.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            state.refused += 1
            log.warning("refusing AdamW step %d: non-finite gradient in %s", state.step + 1, name)
            return False
    state.step += 1
    t = state.step
    lr, b1, b2 = config.learning_rate, config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if config.weight_decay and _decays(name):
            p -= lr * config.weight_decay * p
        p -= lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return True


def clip_by_global_norm(grads: dict, max_norm: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most ``max_norm``; returns the raw norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm is not None and total > max_norm:
        s = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= s
    return total


@dataclass
class TrainResult:
    losses: list[float]
    steps: int
    update_norms: dict[str, float]
    refused_steps: int


def train(model: LSModel, examples: Sequence, config: TrainingConfig,
          augment: Callable | None = None, log_path=None) -> TrainResult:
    """Train every parameter group of ``model`` jointly, in place.

    ``augment(example, epoch)`` returns a code-switched copy of an
    example; with ``config.reaugment`` it is redrawn every epoch,
    otherwise only once.  Batches are shuffled per epoch from
    ``config.seed``.  A non-finite loss raises :class:`TrainingDiverged`.
    """
    examples = list(examples)
    if not examples:
        raise ValueError("no training examples")
    distances = [example_distances(e) for e in examples]
    state = AdamState()
    start = {k: v.copy() for k, v in model.params.items()}
    losses = []
    logf = open(log_path, "w", encoding="utf-8") if log_path else None
    current = examples
    try:
        for epoch in range(config.epochs):
            if augment is not None and (config.reaugment or epoch == 0):
                current = [augment(e, epoch) for e in examples]
            order = np.random.default_rng([config.seed, epoch]).permutation(len(examples))
            for i in range(0, len(order), config.batch_size):
                idx = order[i:i + config.batch_size]
                batch = model.batch([current[j] for j in idx], [distances[j] for j in idx])
                loss, grads, _ = model.loss_and_grads(model.params, batch)
                if not math.isfinite(loss):
                    raise TrainingDiverged(
                        f"loss became {loss} at epoch {epoch}, step {state.step + 1}; "
                        f"last finite loss {losses[-1] if losses else None}")
                if config.clip_norm is not None:
                    clip_by_global_norm(grads, config.clip_norm)
                adamw_step(model.params, grads, state, config)
                losses.append(loss)
                if logf:
                    logf.write(json.dumps({"step": state.step, "loss": loss, "lr": config.learning_rate,
                                           "task": config.task, "seed": config.seed}) + "\n")
    finally:
        if logf:
            logf.close()

    norms: dict[str, float] = {}
    for k, v in model.params.items():
        g = param_group(k)
        norms[g] = norms.get(g, 0.0) + float(((v - start[k]) ** 2).sum())
    return TrainResult(losses, state.step, {k: math.sqrt(v) for k, v in norms.items()}, state.refused)


def accuracy_on(model: LSModel, examples) -> float:
    """Example accuracy for pair tasks, token accuracy for tagging."""
    examples = list(examples)
    preds = model.predict(examples)
    if model.task == PAIR:
        return float(np.mean([p == e.label for p, e in zip(preds, examples)]))
    hits = [a == b for p, e in zip(preds, examples) for a, b in zip(p, e.tags)]
    return float(np.mean(hits))


def _used_rows(model: LSModel, batch, name) -> np.ndarray | None:
    if name in ("gat.W_c", "enc.E"):
        return np.unique(batch.tok[batch.valid])
    if name == "gat.W_pos":
        return np.unique(batch.pos[batch.valid])
    if name == "enc.P":
        return np.arange(batch.tok.shape[1])
    return None


def grad_check(model: LSModel, example, h: float = 1e-5, groups=None, samples: int = 200,
               seed: int = 0, grads: dict | None = None, params: dict | None = None) -> dict[str, float]:
    """Max relative error between analytic and central-difference gradients.

    For each parameter group, ``samples`` coordinates are drawn (embedding
    tables only over rows the input touches) and compared as
    ``|a - n| / max(|a|, |n|, 1e-8)`` with ``n = (L(p+h) - L(p-h)) / 2h``.
    ``grads`` overrides the analytic gradients, which is how a corrupted
    gradient is planted in tests.
    """
    params = model.params if params is None else params
    batch = model.batch([example])
    if grads is None:
        _, grads, _ = model.loss_and_grads(params, batch)
    rng = np.random.default_rng(seed)
    by_group: dict[str, list[str]] = {}
    for name in params:
        by_group.setdefault(param_group(name), []).append(name)
    if groups is None:
        groups = list(by_group)
    result = {}
    for group in groups:
        names = [n for n in by_group.get(group, []) if params[n].size]
        if not names:
            continue
        sizes = np.array([params[n].size for n in names], dtype=float)
        worst = 0.0
        for _ in range(samples):
            name = names[rng.choice(len(names), p=sizes / sizes.sum())]
            p = params[name]
            rows = _used_rows(model, batch, name)
            if rows is not None:
                idx = (int(rng.choice(rows)),) + tuple(int(rng.integers(s)) for s in p.shape[1:])
            else:
                idx = tuple(int(rng.integers(s)) for s in p.shape)
            old = p[idx]
            p[idx] = old + h
            lp = model.loss(params, batch)
            p[idx] = old - h
            lm = model.loss(params, batch)
            p[idx] = old
            num = (lp - lm) / (2 * h)
            a = float(grads[name][idx])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
        result[group] = worst
    return result
