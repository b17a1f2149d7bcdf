"""Encoder architectures and the model wrapper that produces 100-d embeddings."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import EMBED_DIM
from ..errors import ShapeError
from .layers import (BatchNorm, Conv1D, Conv2D, Dense, Dropout, Flatten, MaxPool, ReLU,
                     Sequential, softmax)

CONV2D_BLOCKS = ((16, 3), (16, 3), (32, 5), (32, 5), (32, 5))
CONV1D_BLOCKS = ((16, 3), (16, 3), (32, 3))
KINDS = ("conv2d", "conv1d", "dense")


@dataclass(frozen=True)
class ConvBlock:
    filters: int
    kernel: int  # after clipping to the incoming extent
    pool: bool   # False when the extent after the conv is below 2


@dataclass(frozen=True)
class EncoderArch:
    kind: str
    input_shape: tuple  # (C, H, W), (C, L) or (D,)
    blocks: tuple = ()
    embed_dim: int = EMBED_DIM

    @property
    def out_extent(self) -> int:
        """Spatial extent per axis at the flatten layer (1 for dense)."""
        if self.kind == "dense":
            return 1
        n = self.input_shape[-1]
        for b in self.blocks:
            n = n - b.kernel + 1
            n = n // 2 if b.pool else n
        return n

    @property
    def flatten_width(self) -> int:
        if self.kind == "dense":
            return self.input_shape[0]
        p = self.out_extent
        ndim = 2 if self.kind == "conv2d" else 1
        return self.blocks[-1].filters * p ** ndim

    def to_dict(self) -> dict:
        return {"kind": self.kind, "input_shape": list(self.input_shape),
                "blocks": [[b.filters, b.kernel, b.pool] for b in self.blocks],
                "embed_dim": self.embed_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderArch":
        return cls(d["kind"], tuple(d["input_shape"]),
                   tuple(ConvBlock(int(f), int(k), bool(p)) for f, k, p in d["blocks"]),
                   int(d["embed_dim"]))


def _resolve(spec, extent):
    # Nominal kernels are clipped to the current extent and the 2x pool is skipped
    # once fewer than 2 cells remain, so the arch stays valid for small inputs.
    blocks = []
    for filters, k in spec:
        k = min(k, extent)
        extent = extent - k + 1
        pool = extent >= 2
        if pool:
            extent //= 2
        blocks.append(ConvBlock(filters, k, pool))
    return tuple(blocks)


def make_arch(kind: str, input_shape) -> EncoderArch:
    """Resolve the nominal layer list for an input shape.

    conv2d takes ``(C, S, S)``, conv1d ``(C, L)``, dense ``(D,)``.
    """
    input_shape = tuple(int(v) for v in input_shape)
    if kind == "conv2d":
        if len(input_shape) != 3 or input_shape[1] != input_shape[2]:
            raise ShapeError("conv2d input", "(C, S, S)", input_shape)
        return EncoderArch(kind, input_shape, _resolve(CONV2D_BLOCKS, input_shape[1]))
    if kind == "conv1d":
        if len(input_shape) != 2:
            raise ShapeError("conv1d input", "(C, L)", input_shape)
        return EncoderArch(kind, input_shape, _resolve(CONV1D_BLOCKS, input_shape[1]))
    if kind == "dense":
        if len(input_shape) != 1:
            raise ShapeError("dense input", "(D,)", input_shape)
        return EncoderArch(kind, input_shape)
    raise ValueError(f"unknown encoder kind {kind!r}")


def build_body(arch: EncoderArch, rng, dropout=0.3, dtype=np.float64) -> Sequential:
    layers = []
    if arch.kind in ("conv2d", "conv1d"):
        conv = Conv2D if arch.kind == "conv2d" else Conv1D
        dims = 2 if arch.kind == "conv2d" else 1
        ch = arch.input_shape[0]
        for b in arch.blocks:
            layers += [conv(ch, b.filters, b.kernel, rng, dtype), ReLU(), BatchNorm(b.filters, dtype=dtype)]
            if b.pool:
                layers.append(MaxPool(dims))
            ch = b.filters
        layers[0].need_dx = False
        layers.append(Flatten())
    layers += [Dropout(dropout, rng), Dense(arch.flatten_width, arch.embed_dim, rng, dtype), ReLU()]
    return Sequential(layers)


@dataclass
class EncoderModel:
    arch: EncoderArch
    body: Sequential
    head: Dense
    classes: np.ndarray
    # standardization for dense encoders (None for image / projection inputs)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def prepare(self, x) -> np.ndarray:
        dtype = self.head.params["W"].dtype
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.arch.input_shape:
            raise ShapeError("encoder input", (None,) + self.arch.input_shape, x.shape)
        if self.mean is not None:
            x = (x - self.mean) / self.std
        return x.astype(dtype, copy=False)

    def embed(self, x, batch_size=64) -> np.ndarray:
        x = self.prepare(x)
        out = [self.body.forward(x[i:i + batch_size], train=False) for i in range(0, len(x), batch_size)]
        return np.concatenate(out).astype(np.float64) if out else np.zeros((0, self.arch.embed_dim))

    def predict_proba(self, x, batch_size=64) -> np.ndarray:
        e = self.embed(x, batch_size).astype(self.head.params["W"].dtype)
        return softmax(self.head.forward(e).astype(np.float64))

    def predict(self, x) -> np.ndarray:
        return self.classes[self.predict_proba(x).argmax(axis=1)]


def encode(model: EncoderModel, x) -> np.ndarray:
    """Inference-mode embeddings, shape ``(N, 100)``."""
    return model.embed(x)
