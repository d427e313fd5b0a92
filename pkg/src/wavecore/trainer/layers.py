"""Float64 layers with hand-written backward passes.

Every layer maps ``forward(params, x) -> (y, cache)`` and
``backward(params, cache, dy) -> (dx, grads)``.  Parameters live in a flat
``dict[str, ndarray]`` owned by the network so gradients can be summed and
compared by name.  Tensors are NCHW.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Params = dict[str, np.ndarray]


def _im2col(x: np.ndarray, r: int, s: int, stride: int, pad: int) -> np.ndarray:
    """(N, C, H, W) -> (N, Ho, Wo, C, R, S) view of every receptive field."""
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (r, s), axis=(2, 3))  # N, C, Ho', Wo', R, S
    return win[:, :, ::stride, ::stride].transpose(0, 2, 3, 1, 4, 5)


@dataclass
class Conv2d:
    name: str
    c_in: int
    c_out: int
    kernel: int = 3
    stride: int = 1
    pad: int = 1

    def init(self, rng: np.random.Generator) -> Params:
        fan_in = self.c_in * self.kernel ** 2
        w = rng.normal(0, np.sqrt(2 / fan_in), (self.c_out, self.c_in, self.kernel, self.kernel))
        return {f"{self.name}.w": w, f"{self.name}.b": rng.normal(0, 0.1, self.c_out)}

    def forward(self, p: Params, x: np.ndarray):
        cols = _im2col(x, self.kernel, self.kernel, self.stride, self.pad)
        y = np.einsum("nhwcrs,ocrs->nohw", cols, p[f"{self.name}.w"], optimize=True)
        return y + p[f"{self.name}.b"][None, :, None, None], x

    def backward(self, p: Params, x: np.ndarray, dy: np.ndarray):
        w = p[f"{self.name}.w"]
        cols = _im2col(x, self.kernel, self.kernel, self.stride, self.pad)
        grads = {f"{self.name}.w": np.einsum("nohw,nhwcrs->ocrs", dy, cols, optimize=True),
                 f"{self.name}.b": dy.sum(axis=(0, 2, 3))}
        dcols = np.einsum("nohw,ocrs->nhwcrs", dy, w, optimize=True)
        n, _, h, wd = x.shape
        dxp = np.zeros((n, self.c_in, h + 2 * self.pad, wd + 2 * self.pad))
        ho, wo = dy.shape[2:]
        for i in range(self.kernel):
            for j in range(self.kernel):
                dxp[:, :, i:i + self.stride * ho:self.stride, j:j + self.stride * wo:self.stride] += \
                    dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        dx = dxp[:, :, self.pad:self.pad + h, self.pad:self.pad + wd]
        return dx, grads


@dataclass
class GroupNorm:
    """Statistics over (C/G, H, W) of each sample: no cross-sample coupling."""

    name: str
    channels: int
    groups: int
    eps: float = 1e-5

    def __post_init__(self):
        if self.channels % self.groups:
            raise ValueError(f"{self.groups} groups do not divide {self.channels} channels")

    def init(self, rng: np.random.Generator) -> Params:
        return {f"{self.name}.gamma": 1 + rng.normal(0, 0.1, self.channels),
                f"{self.name}.beta": rng.normal(0, 0.1, self.channels)}

    def forward(self, p: Params, x: np.ndarray):
        n, c, h, w = x.shape
        g = x.reshape(n, self.groups, -1)
        mu = g.mean(axis=2, keepdims=True)
        var = g.var(axis=2, keepdims=True)
        inv = 1 / np.sqrt(var + self.eps)
        xhat = ((g - mu) * inv).reshape(x.shape)
        y = xhat * p[f"{self.name}.gamma"][None, :, None, None] + p[f"{self.name}.beta"][None, :, None, None]
        return y, (xhat, inv)

    def backward(self, p: Params, cache, dy: np.ndarray):
        xhat, inv = cache
        n = dy.shape[0]
        grads = {f"{self.name}.gamma": (dy * xhat).sum(axis=(0, 2, 3)),
                 f"{self.name}.beta": dy.sum(axis=(0, 2, 3))}
        dxhat = (dy * p[f"{self.name}.gamma"][None, :, None, None]).reshape(n, self.groups, -1)
        xh = xhat.reshape(n, self.groups, -1)
        dx = inv * (dxhat - dxhat.mean(axis=2, keepdims=True) - xh * (dxhat * xh).mean(axis=2, keepdims=True))
        return dx.reshape(dy.shape), grads


@dataclass
class BatchNorm:
    """Batch statistics; kept only to show why serialization needs GN."""

    name: str
    channels: int
    eps: float = 1e-5

    def init(self, rng: np.random.Generator) -> Params:
        return {f"{self.name}.gamma": 1 + rng.normal(0, 0.1, self.channels),
                f"{self.name}.beta": rng.normal(0, 0.1, self.channels)}

    def forward(self, p: Params, x: np.ndarray):
        mu = x.mean(axis=(0, 2, 3), keepdims=True)
        var = x.var(axis=(0, 2, 3), keepdims=True)
        inv = 1 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        y = xhat * p[f"{self.name}.gamma"][None, :, None, None] + p[f"{self.name}.beta"][None, :, None, None]
        return y, (xhat, inv)

    def backward(self, p: Params, cache, dy: np.ndarray):
        xhat, inv = cache
        grads = {f"{self.name}.gamma": (dy * xhat).sum(axis=(0, 2, 3)),
                 f"{self.name}.beta": dy.sum(axis=(0, 2, 3))}
        dxhat = dy * p[f"{self.name}.gamma"][None, :, None, None]
        dx = inv * (dxhat - dxhat.mean(axis=(0, 2, 3), keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=(0, 2, 3), keepdims=True))
        return dx, grads


@dataclass
class ReLU:
    name: str = "relu"

    def init(self, rng) -> Params:
        return {}

    def forward(self, p: Params, x: np.ndarray):
        mask = x > 0
        return np.where(mask, x, 0.0), mask   # the 1-bit mask is all backward needs

    def backward(self, p: Params, mask: np.ndarray, dy: np.ndarray):
        return np.where(mask, dy, 0.0), {}


@dataclass
class Pool2d:
    """Non-overlapping k x k pooling; H and W must be multiples of k."""

    name: str
    kernel: int = 2
    mode: str = "max"

    def init(self, rng) -> Params:
        return {}

    def _blocks(self, x):
        n, c, h, w = x.shape
        k = self.kernel
        if h % k or w % k:
            raise ValueError(f"{self.name}: {h}x{w} is not a multiple of the {k}x{k} window")
        return x.reshape(n, c, h // k, k, w // k, k)

    def forward(self, p: Params, x: np.ndarray):
        b = self._blocks(x)
        if self.mode == "avg":
            return b.mean(axis=(3, 5)), x.shape
        y = b.max(axis=(3, 5))
        # first maximal element of each window routes the gradient
        flat = b.transpose(0, 1, 2, 4, 3, 5).reshape(*y.shape, -1)
        arg = flat.argmax(axis=-1)
        return y, (x.shape, arg)

    def backward(self, p: Params, cache, dy: np.ndarray):
        k = self.kernel
        if self.mode == "avg":
            shape = cache
            dx = np.repeat(np.repeat(dy, k, axis=2), k, axis=3) / (k * k)
            return dx.reshape(shape), {}
        shape, arg = cache
        n, c, ho, wo = dy.shape
        flat = np.zeros((n, c, ho, wo, k * k))
        np.put_along_axis(flat, arg[..., None], dy[..., None], axis=-1)
        dx = flat.reshape(n, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(shape)
        return dx, {}


@dataclass
class Linear:
    """Fully connected over the flattened sample."""

    name: str
    d_in: int
    d_out: int

    def init(self, rng: np.random.Generator) -> Params:
        return {f"{self.name}.w": rng.normal(0, np.sqrt(1 / self.d_in), (self.d_out, self.d_in)),
                f"{self.name}.b": rng.normal(0, 0.1, self.d_out)}

    def forward(self, p: Params, x: np.ndarray):
        flat = x.reshape(x.shape[0], -1)
        return flat @ p[f"{self.name}.w"].T + p[f"{self.name}.b"], (x.shape, flat)

    def backward(self, p: Params, cache, dy: np.ndarray):
        shape, flat = cache
        grads = {f"{self.name}.w": dy.T @ flat, f"{self.name}.b": dy.sum(axis=0)}
        return (dy @ p[f"{self.name}.w"]).reshape(shape), grads


@dataclass
class Residual:
    """y = body(x) + shortcut(x); an empty shortcut is the identity."""

    name: str
    body: Sequence[Any]
    shortcut: Sequence[Any] = field(default_factory=tuple)

    def init(self, rng: np.random.Generator) -> Params:
        out: Params = {}
        for layer in (*self.body, *self.shortcut):
            out.update(layer.init(rng))
        return out

    def forward(self, p: Params, x: np.ndarray):
        yb, cb = run_forward(self.body, p, x)
        ys, cs = run_forward(self.shortcut, p, x)
        return yb + ys, (cb, cs)

    def backward(self, p: Params, cache, dy: np.ndarray):
        cb, cs = cache
        dxb, gb = run_backward(self.body, p, cb, dy)
        dxs, gs = run_backward(self.shortcut, p, cs, dy)
        for k, v in gs.items():
            gb[k] = gb[k] + v if k in gb else v
        return dxb + dxs, gb


def run_forward(layers: Sequence[Any], p: Params, x: np.ndarray):
    caches = []
    for layer in layers:
        x, c = layer.forward(p, x)
        caches.append(c)
    return x, caches


def run_backward(layers: Sequence[Any], p: Params, caches, dy: np.ndarray):
    grads: Params = {}
    for layer, c in zip(reversed(layers), reversed(caches)):
        dy, g = layer.backward(p, c, dy)
        grads.update(g)
    return dy, grads
