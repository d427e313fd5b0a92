"""Tiny CNNs, full and sub-batch-serialized training steps, gradient checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .layers import (BatchNorm, Conv2d, GroupNorm, Linear, Params, Pool2d, ReLU, Residual,
                     run_backward, run_forward)


@dataclass
class TinyNet:
    layers: Sequence[Any]
    params: Params = field(default_factory=dict)

    @classmethod
    def build(cls, layers: Sequence[Any], seed: int = 0) -> "TinyNet":
        rng = np.random.default_rng(seed)
        params: Params = {}
        for layer in layers:
            params.update(layer.init(rng))
        return cls(list(layers), params)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return run_forward(self.layers, self.params, x)[0]


@dataclass
class StepResult:
    loss: float
    grads: Params


def _check_finite(name: str, a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite values in {name}")


def softmax_xent(logits: np.ndarray, labels: np.ndarray, scale: float):
    """Summed cross-entropy times ``scale``, and its gradient."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].sum() * scale
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1
    return loss, d * scale


def _step(net: TinyNet, x: np.ndarray, labels: np.ndarray, scale: float) -> StepResult:
    logits, caches = run_forward(net.layers, net.params, x)   # caches are the checkpoints
    _check_finite("logits", logits)
    loss, dlogits = softmax_xent(logits, labels, scale)
    _, grads = run_backward(net.layers, net.params, caches, dlogits)
    for k, g in grads.items():
        _check_finite(k, g)
    return StepResult(float(loss), grads)


def train_step_full(net: TinyNet, x: np.ndarray, labels: np.ndarray) -> StepResult:
    if x.shape[0] < 1:
        raise ValueError("empty batch")
    return _step(net, x, np.asarray(labels), 1.0 / x.shape[0])


def train_step_serialized(net: TinyNet, x: np.ndarray, labels: np.ndarray, sub_batch: int) -> StepResult:
    """Run ceil(B / sub_batch) sub-batches in sequence and accumulate gradients."""
    b = x.shape[0]
    if not 1 <= sub_batch <= b:
        raise ValueError(f"sub_batch must be in [1, {b}]")
    if sub_batch == b:
        return train_step_full(net, x, labels)
    labels = np.asarray(labels)
    loss = 0.0
    acc: Params = {}
    for i in range(math.ceil(b / sub_batch)):
        sl = slice(i * sub_batch, (i + 1) * sub_batch)
        part = _step(net, x[sl], labels[sl], 1.0 / b)
        loss += part.loss
        for k, g in part.grads.items():
            acc[k] = acc[k] + g if k in acc else g.copy()
    return StepResult(loss, acc)


def relative_delta(a: Params, b: Params) -> dict[str, float]:
    out = {}
    for k in a:
        denom = max(np.linalg.norm(a[k]), np.linalg.norm(b[k]), 1e-300)
        out[k] = float(np.linalg.norm(a[k] - b[k]) / denom)
    return out


def finite_difference_check(net: TinyNet, x: np.ndarray, labels: np.ndarray, h: float = 1e-5,
                            max_entries: int = 24, seed: int = 0) -> dict[str, float]:
    """Relative error of analytic gradients against central differences, per parameter.

    Large tensors are probed at ``max_entries`` random positions.
    """
    rng = np.random.default_rng(seed)
    grads = train_step_full(net, x, labels).grads
    errors = {}
    for name, value in net.params.items():
        flat = value.reshape(-1)
        idx = np.arange(flat.size) if flat.size <= max_entries else rng.choice(flat.size, max_entries, replace=False)
        num = np.empty(len(idx))
        for t, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            up = train_step_full(net, x, labels).loss
            flat[i] = orig - h
            down = train_step_full(net, x, labels).loss
            flat[i] = orig
            num[t] = (up - down) / (2 * h)
        ana = grads[name].reshape(-1)[idx]
        errors[name] = float(np.linalg.norm(num - ana) / max(np.linalg.norm(ana), np.linalg.norm(num), 1e-12))
    return errors


def random_tiny_net(seed: int, norm: str = "gn", groups: int = 2, channels: int = 8,
                    image: int = 8, classes: int = 5, in_channels: int = 3) -> TinyNet:
    """Conv-norm-ReLU stem, one residual block, pooling and a classifier."""
    rng = np.random.default_rng(seed)
    c = channels
    projection = bool(rng.integers(2))

    def norm_layer(name, ch):
        return GroupNorm(name, ch, groups) if norm == "gn" else BatchNorm(name, ch)

    body = [Conv2d("b.conv1", c, c), norm_layer("b.n1", c), ReLU("b.relu"),
            Conv2d("b.conv2", c, c), norm_layer("b.n2", c)]
    shortcut = [Conv2d("b.proj", c, c, kernel=1, pad=0), norm_layer("b.np", c)] if projection else []
    layers = [Conv2d("stem", in_channels, c), norm_layer("stem.n", c), ReLU("stem.relu"),
              Residual("b", body, shortcut), ReLU("b.out"),
              Pool2d("pool", 2, "max" if seed % 2 == 0 else "avg"),
              Linear("fc", c * (image // 2) ** 2, classes)]
    return TinyNet.build(layers, seed)


def random_batch(seed: int, batch: int = 8, channels: int = 3, image: int = 8, classes: int = 5):
    rng = np.random.default_rng(10_000 + seed)
    return rng.normal(size=(batch, channels, image, image)), rng.integers(0, classes, batch)
