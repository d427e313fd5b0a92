"""Random toy networks for the oracle and grouping tests."""

from __future__ import annotations

import numpy as np

from wavecore.ir import build_graph
from wavecore.ir.zoo import NetBuilder


def _conv(b: NetBuilder, rng, lid: str, src: str, c_out: int, stride: int = 1):
    k = int(rng.choice([1, 3]))
    return b.add(lid, "conv", src, c_out=c_out, kernel=k, pad=k // 2, stride=stride if stride != 1 else None)


def _elementwise(b: NetBuilder, rng, lid: str, src: str):
    if rng.integers(2):
        return b.add(lid, "relu", src)
    return b.add(lid, "norm", src, type="gn", groups=1)


def _chain(b: NetBuilder, rng, prefix: str, src: str, length: int, c_out: int, stride: int = 1) -> list[str]:
    """A branch ending in a conv with ``c_out`` channels, so shapes line up at the merge."""
    ids = []
    x = src
    for i in range(length - 1):
        if i == 0 or rng.integers(3) == 0:
            x = _conv(b, rng, f"{prefix}_{i}", x, int(rng.integers(1, 9)), stride if i == 0 else 1)
        else:
            x = _elementwise(b, rng, f"{prefix}_{i}", x)
        ids.append(x)
    ids.append(_conv(b, rng, f"{prefix}_{length - 1}", x, c_out, stride if length == 1 else 1))
    return ids


def random_block_net(seed: int, kind: str):
    """Stem conv, one random residual or inception block, then a ReLU."""
    rng = np.random.default_rng(seed)
    c, hw = int(rng.integers(1, 9)), int(rng.integers(2, 9))
    b = NetBuilder(f"toy_{kind}_{seed}", (c, hw, hw))
    stem = b.add("stem", "conv", "input", c_out=int(rng.integers(1, 9)), kernel=1)
    if kind == "residual":
        c_out = int(rng.integers(1, 17))
        stride = int(rng.choice([1, 2])) if hw >= 4 else 1
        main = _chain(b, rng, "main", stem, int(rng.integers(1, 6)), c_out, stride)
        if stride == 1 and b.layers[0]["c_out"] == c_out and rng.integers(2):
            short, sc = [], stem
        else:
            sc = b.add("proj", "conv", stem, c_out=c_out, kernel=1, stride=stride if stride != 1 else None)
            short = [sc]
            if rng.integers(2):
                sc = b.add("proj_gn", "norm", sc, type="gn", groups=1)
                short.append(sc)
        merge = b.add("merge", "add", [main[-1], sc])
        b.block("blk", "residual", stem, [main, short], merge)
    else:
        branches = [_chain(b, rng, f"br{j}", stem, int(rng.integers(1, 5)), int(rng.integers(1, 9)))
                    for j in range(int(rng.integers(2, 5)))]
        merge = b.add("merge", "concat", [br[-1] for br in branches])
        b.block("blk", "inception", stem, branches, merge)
    b.add("out", "relu", merge)
    return build_graph(b.to_dict())


def random_chain_net(seed: int, max_layers: int = 10):
    """Up to ``max_layers`` layers: a conv stem, a mix of convs, element-wise
    layers and pooling, and sometimes one small residual block."""
    rng = np.random.default_rng(seed)
    b = NetBuilder(f"chain_{seed}", (int(rng.integers(1, 5)), 16, 16))
    x = _conv(b, rng, "l0", "input", int(rng.integers(2, 17)))
    count, hw, i = 1, 16, 1
    with_block = bool(rng.integers(2))
    while count < max_layers:
        room = max_layers - count
        if with_block and room >= 4 and rng.integers(3) == 0:
            c = next(l["c_out"] for l in reversed(b.layers) if "c_out" in l)
            y = _conv(b, rng, f"r{i}a", x, int(rng.integers(2, 17)))
            y = _conv(b, rng, f"r{i}b", y, c)
            merge = b.add(f"r{i}_add", "add", [y, x])
            b.block(f"r{i}", "residual", x, [[f"r{i}a", f"r{i}b"], []], merge)
            x = merge
            count += 3
            with_block = False
        else:
            op = int(rng.integers(4))
            if op == 0 and hw >= 4:
                x = b.add(f"l{i}", "pool", x, mode="max", kernel=2, stride=2)
                hw //= 2
            elif op == 1:
                x = _elementwise(b, rng, f"l{i}", x)
            else:
                x = _conv(b, rng, f"l{i}", x, int(rng.integers(2, 33)))
            count += 1
        i += 1
    return build_graph(b.to_dict())
