"""Versioned ``.npz`` container for encoder models."""
from __future__ import annotations

import json

import numpy as np

from .encoders import EncoderArch, EncoderModel, build_body
from .layers import Dense

FORMAT_VERSION = 1


def save_encoder(path, model: EncoderModel) -> None:
    arrays = {}
    for i, layer in enumerate(model.body.layers):
        for k, v in {**layer.params, **layer.state()}.items():
            arrays[f"body.{i}.{k}"] = v
    for k, v in model.head.params.items():
        arrays[f"head.{k}"] = v
    arrays["classes"] = np.asarray(model.classes)
    if model.mean is not None:
        arrays["input.mean"] = model.mean
        arrays["input.std"] = model.std
    meta = {"format": "leafrec-encoder", "version": FORMAT_VERSION, "arch": model.arch.to_dict(),
            "dtype": str(model.head.params["W"].dtype), "meta": model.meta,
            "shapes": {k: list(v.shape) for k, v in arrays.items()}}
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_encoder(path) -> EncoderModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format") != "leafrec-encoder" or meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported encoder container")
        arch = EncoderArch.from_dict(meta["arch"])
        dtype = np.dtype(meta["dtype"])
        body = build_body(arch, np.random.default_rng(0), 0.0, dtype)
        for i, layer in enumerate(body.layers):
            for k in layer.params:
                layer.params[k] = z[f"body.{i}.{k}"].copy()
            state = {k: z[f"body.{i}.{k}"] for k in layer.state()}
            if state:
                layer.load_state(state)
        classes = z["classes"].copy()
        head = Dense(arch.embed_dim, len(classes), np.random.default_rng(0), dtype)
        head.params = {k: z[f"head.{k}"].copy() for k in ("W", "b")}
        mean = z["input.mean"].copy() if "input.mean" in z else None
        std = z["input.std"].copy() if "input.std" in z else None
    return EncoderModel(arch, body, head, classes, mean, std, meta.get("meta", {}))
