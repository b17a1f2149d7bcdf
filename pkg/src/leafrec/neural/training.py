"""Mini-batch SGD training of an encoder jointly with a softmax head."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .encoders import EncoderArch, EncoderModel, build_body
from .layers import Dense, softmax_cross_entropy


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    l2: float = 1e-4
    dropout: float = 0.3
    seed: int = 0
    momentum: float = 0.9
    dtype: str = "float64"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "lr", "l2", "momentum"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


def _layers(model: EncoderModel):
    return model.body.trainable() + [model.head]


def loss_and_grads(model: EncoderModel, x, y, l2=0.0, train=True):
    """Forward + backward on one prepared batch. ``y`` holds class indices.

    Returns (total loss, data loss, logits). Gradients land in each layer's ``grads``.
    """
    emb = model.body.forward(x, train)
    logits = model.head.forward(emb)
    data_loss, dlogits = softmax_cross_entropy(logits.astype(np.float64), y)
    model.body.backward(model.head.backward(dlogits.astype(logits.dtype)))
    penalty = 0.0
    if l2:
        for layer in _layers(model):
            for name in layer.decayed:
                w = layer.params[name]
                penalty += 0.5 * l2 * float(np.sum(w.astype(np.float64) ** 2))
                layer.grads[name] = layer.grads[name] + l2 * w
    return data_loss + penalty, data_loss, logits


def _snapshot(model):
    params = [{k: v.copy() for k, v in l.params.items()} for l in _layers(model)]
    states = [{k: np.copy(v) for k, v in l.state().items()} for l in model.body.layers]
    return params, states


def _restore(model, snap):
    params, states = snap
    for layer, p in zip(_layers(model), params):
        layer.params.update(p)
    for layer, s in zip(model.body.layers, states):
        if s:
            layer.load_state(s)


def evaluate(model: EncoderModel, x, y_idx, batch_size=64):
    """Inference-mode mean cross-entropy and accuracy on prepared inputs."""
    losses, correct = 0.0, 0
    for i in range(0, len(x), batch_size):
        xb, yb = x[i:i + batch_size], y_idx[i:i + batch_size]
        logits = model.head.forward(model.body.forward(xb, train=False)).astype(np.float64)
        loss, _ = softmax_cross_entropy(logits, yb)
        losses += loss * len(xb)
        correct += int((logits.argmax(axis=1) == yb).sum())
    return losses / len(x), correct / len(x)


def init_model(arch: EncoderArch, classes, cfg: TrainConfig, x_train=None) -> EncoderModel:
    init_seed, _, drop_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    dtype = np.dtype(cfg.dtype)
    init_rng = np.random.default_rng(init_seed)
    body = build_body(arch, init_rng, cfg.dropout, dtype)
    for layer in body.layers:
        if hasattr(layer, "rate"):
            layer.rng = np.random.default_rng(drop_seed)
    head = Dense(arch.embed_dim, len(classes), init_rng, dtype)
    model = EncoderModel(arch, body, head, np.asarray(classes))
    if arch.kind == "dense" and x_train is not None:
        x = np.asarray(x_train, dtype=np.float64)
        std = x.std(axis=0)
        model.mean = x.mean(axis=0)
        model.std = np.where(std > 0, std, 1.0)
    return model


def train_encoder(x_train, y_train, arch: EncoderArch, cfg: TrainConfig = TrainConfig(),
                  x_valid=None, y_valid=None):
    """Train ``arch`` with a softmax head; returns (model, history).

    The returned weights are those of the epoch with the best validation
    accuracy (earliest on ties). Without validation data, training accuracy
    is used for the selection.
    """
    classes = np.unique(np.asarray(y_train))
    if len(classes) < 2:
        raise ValueError("train_encoder needs at least two classes")
    model = init_model(arch, classes, cfg, x_train)
    xt = model.prepare(x_train)
    yt = np.searchsorted(classes, np.asarray(y_train))
    has_valid = x_valid is not None and len(x_valid) > 0
    if has_valid:
        xv = model.prepare(x_valid)
        yv = np.searchsorted(classes, np.asarray(y_valid))
        if not np.isin(np.asarray(y_valid), classes).all():
            raise ValueError("validation labels unseen in training")

    shuffle_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[1])
    layers = _layers(model)
    velocity = [{k: np.zeros_like(v) for k, v in l.params.items()} for l in layers]
    history = []
    best, best_acc = None, -1.0
    n = len(xt)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        tot_loss, correct = 0.0, 0
        for i in range(0, n, cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            loss, data_loss, logits = loss_and_grads(model, xt[idx], yt[idx], cfg.l2)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, cfg.lr)
            tot_loss += data_loss * len(idx)
            correct += int((logits.argmax(axis=1) == yt[idx]).sum())
            for layer, vel in zip(layers, velocity):
                for k, p in layer.params.items():
                    v = vel[k]
                    v *= cfg.momentum
                    v -= cfg.lr * layer.grads[k]
                    p += v
        rec = {"epoch": epoch, "train_loss": tot_loss / n, "train_acc": correct / n}
        if has_valid:
            rec["valid_loss"], rec["valid_acc"] = evaluate(model, xv, yv)
            score = rec["valid_acc"]
        else:
            score = rec["train_acc"]
        if not np.isfinite(rec.get("valid_loss", 0.0)):
            raise DivergenceError(epoch, cfg.lr)
        history.append(rec)
        if score > best_acc:
            best_acc, best = score, _snapshot(model)
            model.meta["best_epoch"] = epoch
    if best is not None:
        _restore(model, best)
    return model, history
