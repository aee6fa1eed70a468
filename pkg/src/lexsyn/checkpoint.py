"""Model checkpoints as a JSON tensor map.

Layout::

    {"format": "lexsyn-tensors", "version": 1,
     "task": ..., "labels": [...], "vocab": [...],
     "gat_config": {...}, "enc_config": {...},
     "tensors": {name: {"shape": [...], "data": [row-major floats]}}}

Floats are written with Python's shortest round-trip repr, so loading
restores every parameter bit for bit.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .encoder import EncoderConfig
from .gat import GATConfig
from .model import LSModel, Vocab, pos_vocab

FORMAT = "lexsyn-tensors"
VERSION = 1

__all__ = ["save_model", "load_model", "model_manifest", "tensors_to_json", "tensors_from_json",
           "CheckpointError"]


class CheckpointError(ValueError):
    pass


def tensors_to_json(params: dict[str, np.ndarray]) -> dict:
    return {name: {"shape": list(v.shape), "data": np.asarray(v, dtype=float).ravel().tolist()}
            for name, v in sorted(params.items())}


def tensors_from_json(obj: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, t in obj.items():
        shape = tuple(t["shape"])
        data = np.asarray(t["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise CheckpointError(f"tensor {name!r}: {data.size} values for shape {shape}")
        out[name] = data.reshape(shape)
    return out


def _config_dict(cfg) -> dict:
    d = dataclasses.asdict(cfg)
    if d.get("bias_layers") is not None:
        d["bias_layers"] = list(d["bias_layers"])
    if d.get("mask_delta") == float("inf"):
        d["mask_delta"] = "inf"
    return d


def _gat_config(d: dict) -> GATConfig:
    d = dict(d)
    if d.get("mask_delta") == "inf":
        d["mask_delta"] = float("inf")
    return GATConfig(**d)


def _enc_config(d: dict) -> EncoderConfig:
    d = dict(d)
    if d.get("bias_layers") is not None:
        d["bias_layers"] = tuple(d["bias_layers"])
    return EncoderConfig(**d)


def model_manifest(model: LSModel) -> dict:
    """Both configs and the mask distance, without the tensors."""
    return {
        "task": model.task,
        "labels": list(model.labels),
        "gat_config": _config_dict(model.gat_config),
        "enc_config": _config_dict(model.enc_config),
        "mask_delta": _config_dict(model.gat_config)["mask_delta"],
    }


def save_model(model: LSModel, path) -> None:
    obj = {"format": FORMAT, "version": VERSION, **model_manifest(model),
           "vocab": model.vocab.items, "pos_vocab": model.pos.items,
           "tensors": tensors_to_json(model.params)}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f)


def load_model(path) -> LSModel:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a {FORMAT} file")
    if obj.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {obj.get('version')}")
    params = tensors_from_json(obj["tensors"])
    pv = Vocab(obj["pos_vocab"]) if "pos_vocab" in obj else pos_vocab()
    return LSModel(task=obj["task"], labels=obj["labels"], vocab=Vocab(obj["vocab"]),
                   gat_config=_gat_config(obj["gat_config"]), enc_config=_enc_config(obj["enc_config"]),
                   params=params, pos=pv)
