"""Layers with explicit forward/backward passes.

Tensors are numpy arrays, batch first: ``(B, C, H, W)`` for 2-D feature
maps, ``(B, C, L)`` for 1-D, ``(B, D)`` for vectors.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


class Layer:
    trainable = False
    # first layer of a network can skip the input gradient
    need_dx = True
    # names of params that receive L2 decay
    decayed = ()

    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def state(self):
        """Non-trainable arrays that must be saved (e.g. running statistics)."""
        return {}

    def load_state(self, state):
        pass


def he_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """Valid, stride-1 convolution (cross-correlation)."""

    trainable = True
    decayed = ("W",)

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float64):
        super().__init__()
        self.k = kernel
        self.in_channels = in_channels
        fan_in = in_channels * kernel * kernel
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = he_uniform(rng, (filters, in_channels, kernel, kernel), fan_in, dtype)
        self.params["b"] = np.zeros(filters, dtype=dtype)

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.in_channels or min(x.shape[2:]) < self.k:
            raise ShapeError("Conv2D input", f"(B, {self.in_channels}, >={self.k}, >={self.k})", x.shape)
        self.x = x
        cols = sliding_window_view(x, (self.k, self.k), axis=(2, 3))
        out = np.tensordot(cols, self.params["W"], axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + self.params["b"][None, :, None, None]

    def backward(self, dout):
        k = self.k
        cols = sliding_window_view(self.x, (k, k), axis=(2, 3))
        self.grads["W"] = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 2, 3]))
        self.grads["b"] = dout.sum(axis=(0, 2, 3))
        if not self.need_dx:
            return None
        padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        win = sliding_window_view(padded, (k, k), axis=(2, 3))
        flipped = self.params["W"][:, :, ::-1, ::-1]
        dx = np.tensordot(win, flipped, axes=([1, 4, 5], [0, 2, 3]))
        return dx.transpose(0, 3, 1, 2)


class Conv1D(Layer):
    trainable = True
    decayed = ("W",)

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float64):
        super().__init__()
        self.k = kernel
        self.in_channels = in_channels
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = he_uniform(rng, (filters, in_channels, kernel), in_channels * kernel, dtype)
        self.params["b"] = np.zeros(filters, dtype=dtype)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.in_channels or x.shape[2] < self.k:
            raise ShapeError("Conv1D input", f"(B, {self.in_channels}, >={self.k})", x.shape)
        self.x = x
        cols = sliding_window_view(x, self.k, axis=2)  # (B, C, Lo, k)
        out = np.tensordot(cols, self.params["W"], axes=([1, 3], [1, 2]))  # (B, Lo, F)
        return out.transpose(0, 2, 1) + self.params["b"][None, :, None]

    def backward(self, dout):
        k = self.k
        cols = sliding_window_view(self.x, k, axis=2)
        self.grads["W"] = np.tensordot(dout, cols, axes=([0, 2], [0, 2]))
        self.grads["b"] = dout.sum(axis=(0, 2))
        if not self.need_dx:
            return None
        padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1)))
        win = sliding_window_view(padded, k, axis=2)
        dx = np.tensordot(win, self.params["W"][:, :, ::-1], axes=([1, 3], [0, 2]))
        return dx.transpose(0, 2, 1)


class Dense(Layer):
    trainable = True
    decayed = ("W",)

    def __init__(self, n_in, n_out, rng=None, dtype=np.float64):
        super().__init__()
        self.n_in = n_in
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = he_uniform(rng, (n_in, n_out), n_in, dtype)
        self.params["b"] = np.zeros(n_out, dtype=dtype)

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError("Dense input", f"(B, {self.n_in})", x.shape)
        self.x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] = self.x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x, train=False):
        self.pos = x > 0
        return np.where(self.pos, x, 0.0).astype(x.dtype, copy=False)

    def backward(self, dout):
        return np.where(self.pos, dout, 0.0).astype(dout.dtype, copy=False)


class BatchNorm(Layer):
    """Per-channel normalization over batch and spatial axes."""

    trainable = True

    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=np.float64):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def _bshape(self, x):
        return (1, -1) + (1,) * (x.ndim - 2)

    def forward(self, x, train=False):
        axes = (0,) + tuple(range(2, x.ndim))
        bs = self._bshape(x)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mean
            self.running_var = m * self.running_var + (1 - m) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(bs)) * inv.reshape(bs)
        self.cache = (xhat, inv, axes, bs)
        return self.params["gamma"].reshape(bs) * xhat + self.params["beta"].reshape(bs)

    def backward(self, dout):
        xhat, inv, axes, bs = self.cache
        n = dout.size // dout.shape[1]
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"].reshape(bs)
        return (inv.reshape(bs) / n) * (
            n * dxhat
            - dxhat.sum(axis=axes).reshape(bs)
            - xhat * (dxhat * xhat).sum(axis=axes).reshape(bs)
        )

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state):
        self.running_mean = np.array(state["running_mean"])
        self.running_var = np.array(state["running_var"])


class MaxPool(Layer):
    """Non-overlapping max-pool of size 2 over the trailing 1 or 2 axes (floor)."""

    def __init__(self, dims):
        super().__init__()
        self.dims = dims

    def forward(self, x, train=False):
        self.in_shape = x.shape
        if self.dims == 2:
            B, C, H, W = x.shape
            h2, w2 = H // 2, W // 2
            blocks = x[:, :, :2 * h2, :2 * w2].reshape(B, C, h2, 2, w2, 2)
            blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, h2, w2, 4)
        else:
            B, C, L = x.shape
            blocks = x[:, :, :2 * (L // 2)].reshape(B, C, L // 2, 2)
        self.arg = blocks.argmax(axis=-1)
        return np.take_along_axis(blocks, self.arg[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        width = 4 if self.dims == 2 else 2
        onehot = (self.arg[..., None] == np.arange(width)) * dout[..., None]
        dx = np.zeros(self.in_shape, dtype=dout.dtype)
        if self.dims == 2:
            B, C, h2, w2 = dout.shape
            blk = onehot.reshape(B, C, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
            dx[:, :, :2 * h2, :2 * w2] = blk.reshape(B, C, 2 * h2, 2 * w2)
        else:
            B, C, l2 = dout.shape
            dx[:, :, :2 * l2] = onehot.reshape(B, C, 2 * l2)
        return dx


class Flatten(Layer):
    def forward(self, x, train=False):
        self.in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self.in_shape)


class Dropout(Layer):
    """Inverted dropout; identity at inference."""

    def __init__(self, rate, rng=None):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.frozen = False
        self.mask = None

    def forward(self, x, train=False):
        if not train or self.rate == 0:
            self.mask = None
            return x
        if not (self.frozen and self.mask is not None and self.mask.shape == x.shape):
            keep = 1.0 - self.rate
            self.mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self.mask

    def backward(self, dout):
        return dout if self.mask is None else dout * self.mask


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient ``(probs - onehot) / B``."""
    probs = softmax(logits)
    b = logits.shape[0]
    idx = np.arange(b)
    loss = -np.log(np.maximum(probs[idx, labels], 1e-300)).mean()
    grad = probs.copy()
    grad[idx, labels] -= 1.0
    return float(loss), grad / b


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
            if dout is None:
                break
        return dout

    def trainable(self):
        return [l for l in self.layers if l.trainable]
