"""Programmatic builders for the bundled network files.

The YAML files under ``networks/`` are generated from these builders
(``python -m wavecore.ir.zoo``) and are the artifacts actually loaded at
runtime; the builders stay around so the files can be regenerated.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any

import yaml


class NetBuilder:
    def __init__(self, name: str, input_chw: tuple[int, int, int], norm_groups: int = 32,
                 notes: str | None = None):
        self.name = name
        self.input = list(input_chw)
        self.norm_groups = norm_groups
        self.notes = notes
        self.layers: list[dict[str, Any]] = []
        self.blocks: list[dict[str, Any]] = []

    def add(self, lid: str, kind: str, inputs: str | list[str], **params) -> str:
        entry: dict[str, Any] = {"id": lid, "kind": kind,
                                 "inputs": [inputs] if isinstance(inputs, str) else list(inputs)}
        entry.update({k: v for k, v in params.items() if v is not None})
        self.layers.append(entry)
        return lid

    def conv_bn_relu(self, prefix: str, src: str, c_out: int, kernel=1, stride=1, pad=0,
                     relu: bool = True, acc: list[str] | None = None) -> str:
        ids = [self.add(prefix, "conv", src, c_out=c_out, kernel=kernel,
                        stride=stride if stride != 1 else None, pad=pad or None),
               self.add(f"{prefix}_gn", "norm", prefix, type="gn", groups=self.norm_groups)]
        if relu:
            ids.append(self.add(f"{prefix}_relu", "relu", ids[-1]))
        if acc is not None:
            acc.extend(ids)
        return ids[-1]

    def block(self, bid: str, kind: str, split: str, branches: list[list[str]], merge: str):
        self.blocks.append({"id": bid, "kind": kind, "split": split,
                            "branches": branches, "merge": merge})

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"name": self.name}
        if self.notes:
            d["notes"] = self.notes
        d["input"] = self.input
        d["layers"] = self.layers
        d["blocks"] = self.blocks
        return d


def resnet50() -> dict:
    b = NetBuilder("resnet50", (3, 224, 224), notes=(
        "ResNet-50 v1 (stride on the first 1x1 conv of each down-sampling block). "
        "Batch norm replaced by group norm (G=32). Loss/softmax omitted."))
    x = b.conv_bn_relu("conv1", "input", 64, kernel=7, stride=2, pad=3)
    x = b.add("pool1", "pool", x, mode="max", kernel=3, stride=2, pad=1)
    for stage, (width, depth, stride) in enumerate(((64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)), 2):
        for i in range(depth):
            p = f"res{stage}{chr(ord('a') + i)}"
            s = stride if i == 0 else 1
            main: list[str] = []
            y = b.conv_bn_relu(f"{p}_branch2a", x, width, stride=s, acc=main)
            y = b.conv_bn_relu(f"{p}_branch2b", y, width, kernel=3, pad=1, acc=main)
            y = b.conv_bn_relu(f"{p}_branch2c", y, 4 * width, relu=False, acc=main)
            short: list[str] = []
            sc = x
            if i == 0:
                sc = b.conv_bn_relu(f"{p}_branch1", x, 4 * width, stride=s, relu=False, acc=short)
            merge = b.add(f"{p}_add", "add", [y, sc])
            b.block(p, "residual", x, [main, short], merge)
            x = b.add(f"{p}_relu", "relu", merge)
    x = b.add("pool5", "pool", x, mode="avg", **{"global": True})
    b.add("fc1000", "fc", x, c_out=1000)
    return b.to_dict()


def _inception(b: NetBuilder, bid: str, src: str, branch_fns) -> str:
    branches, ends = [], []
    for j, fn in enumerate(branch_fns):
        acc: list[str] = []
        outs = fn(f"{bid}_b{j}", src, acc)
        branches.append(acc)
        ends.extend(outs if isinstance(outs, list) else [outs])
    merge = b.add(f"{bid}_concat", "concat", ends)
    b.block(bid, "inception", src, branches, merge)
    return merge


def _chain(b: NetBuilder, convs):
    """Branch made of successive conv_bn_relu units; convs = [(c_out, kernel, stride, pad)]."""
    def fn(prefix, src, acc):
        x = src
        for i, (c, k, s, p) in enumerate(convs):
            x = b.conv_bn_relu(f"{prefix}_{i}", x, c, kernel=k, stride=s, pad=p, acc=acc)
        return x
    return fn


def _pool_branch(b: NetBuilder, mode: str, stride: int, pad: int, proj: int | None = None):
    def fn(prefix, src, acc):
        x = b.add(f"{prefix}_pool", "pool", src, mode=mode, kernel=3,
                  stride=stride if stride != 3 else None, pad=pad or None)
        acc.append(x)
        if proj:
            x = b.conv_bn_relu(f"{prefix}_proj", x, proj, acc=acc)
        return x
    return fn


def _fork(b: NetBuilder, head, tails):
    """Branch with a shared head followed by parallel tails (all tails feed the merge)."""
    def fn(prefix, src, acc):
        x = _chain(b, head)(f"{prefix}", src, acc)
        outs = []
        for t, (c, k, s, p) in enumerate(tails):
            outs.append(b.conv_bn_relu(f"{prefix}_t{t}", x, c, kernel=k, stride=s, pad=p, acc=acc))
        return outs
    return fn


K17, K71 = [1, 7], [7, 1]
P17, P71 = [0, 3], [3, 0]
K13, K31 = [1, 3], [3, 1]
P13, P31 = [0, 1], [1, 0]


def inception_v3() -> dict:
    b = NetBuilder("inception_v3", (3, 299, 299), norm_groups=16, notes=(
        "Inception v3 following the torchvision layout (Szegedy et al. 2016); auxiliary "
        "classifier omitted. Group norm G=16 so that every channel count divides. Other "
        "implementations may differ in minor layer details."))
    x = b.conv_bn_relu("conv1a", "input", 32, kernel=3, stride=2)
    x = b.conv_bn_relu("conv2a", x, 32, kernel=3)
    x = b.conv_bn_relu("conv2b", x, 64, kernel=3, pad=1)
    x = b.add("pool1", "pool", x, mode="max", kernel=3, stride=2)
    x = b.conv_bn_relu("conv3b", x, 80)
    x = b.conv_bn_relu("conv4a", x, 192, kernel=3)
    x = b.add("pool2", "pool", x, mode="max", kernel=3, stride=2)
    for name, pf in (("mixed5b", 32), ("mixed5c", 64), ("mixed5d", 64)):
        x = _inception(b, name, x, [
            _chain(b, [(64, 1, 1, 0)]),
            _chain(b, [(48, 1, 1, 0), (64, 5, 1, 2)]),
            _chain(b, [(64, 1, 1, 0), (96, 3, 1, 1), (96, 3, 1, 1)]),
            _pool_branch(b, "avg", 1, 1, proj=pf),
        ])
    x = _inception(b, "mixed6a", x, [
        _chain(b, [(384, 3, 2, 0)]),
        _chain(b, [(64, 1, 1, 0), (96, 3, 1, 1), (96, 3, 2, 0)]),
        _pool_branch(b, "max", 2, 0),
    ])
    for name, c7 in (("mixed6b", 128), ("mixed6c", 160), ("mixed6d", 160), ("mixed6e", 192)):
        x = _inception(b, name, x, [
            _chain(b, [(192, 1, 1, 0)]),
            _chain(b, [(c7, 1, 1, 0), (c7, K17, 1, P17), (192, K71, 1, P71)]),
            _chain(b, [(c7, 1, 1, 0), (c7, K71, 1, P71), (c7, K17, 1, P17),
                       (c7, K71, 1, P71), (192, K17, 1, P17)]),
            _pool_branch(b, "avg", 1, 1, proj=192),
        ])
    x = _inception(b, "mixed7a", x, [
        _chain(b, [(192, 1, 1, 0), (320, 3, 2, 0)]),
        _chain(b, [(192, 1, 1, 0), (192, K17, 1, P17), (192, K71, 1, P71), (192, 3, 2, 0)]),
        _pool_branch(b, "max", 2, 0),
    ])
    for name in ("mixed7b", "mixed7c"):
        x = _inception(b, name, x, [
            _chain(b, [(320, 1, 1, 0)]),
            _fork(b, [(384, 1, 1, 0)], [(384, K13, 1, P13), (384, K31, 1, P31)]),
            _fork(b, [(448, 1, 1, 0), (384, 3, 1, 1)], [(384, K13, 1, P13), (384, K31, 1, P31)]),
            _pool_branch(b, "avg", 1, 1, proj=192),
        ])
    x = b.add("pool3", "pool", x, mode="avg", **{"global": True})
    b.add("fc1000", "fc", x, c_out=1000)
    return b.to_dict()


def inception_v4() -> dict:
    b = NetBuilder("inception_v4", (3, 299, 299), norm_groups=32, notes=(
        "Inception v4 (Szegedy et al. 2017) with the stem split into three small "
        "inception-style blocks. Group norm G=32. Other implementations "
        "may differ in minor layer details."))
    x = b.conv_bn_relu("stem1", "input", 32, kernel=3, stride=2)
    x = b.conv_bn_relu("stem2", x, 32, kernel=3)
    x = b.conv_bn_relu("stem3", x, 64, kernel=3, pad=1)
    x = _inception(b, "mixed3a", x, [_pool_branch(b, "max", 2, 0), _chain(b, [(96, 3, 2, 0)])])
    x = _inception(b, "mixed4a", x, [
        _chain(b, [(64, 1, 1, 0), (96, 3, 1, 0)]),
        _chain(b, [(64, 1, 1, 0), (64, K17, 1, P17), (64, K71, 1, P71), (96, 3, 1, 0)]),
    ])
    x = _inception(b, "mixed5a", x, [_chain(b, [(192, 3, 2, 0)]), _pool_branch(b, "max", 2, 0)])
    for i in range(4):
        x = _inception(b, f"inc_a{i}", x, [
            _chain(b, [(96, 1, 1, 0)]),
            _chain(b, [(64, 1, 1, 0), (96, 3, 1, 1)]),
            _chain(b, [(64, 1, 1, 0), (96, 3, 1, 1), (96, 3, 1, 1)]),
            _pool_branch(b, "avg", 1, 1, proj=96),
        ])
    x = _inception(b, "red_a", x, [
        _chain(b, [(384, 3, 2, 0)]),
        _chain(b, [(192, 1, 1, 0), (224, 3, 1, 1), (256, 3, 2, 0)]),
        _pool_branch(b, "max", 2, 0),
    ])
    for i in range(7):
        x = _inception(b, f"inc_b{i}", x, [
            _chain(b, [(384, 1, 1, 0)]),
            _chain(b, [(192, 1, 1, 0), (224, K17, 1, P17), (256, K71, 1, P71)]),
            _chain(b, [(192, 1, 1, 0), (192, K71, 1, P71), (224, K17, 1, P17),
                       (224, K71, 1, P71), (256, K17, 1, P17)]),
            _pool_branch(b, "avg", 1, 1, proj=128),
        ])
    x = _inception(b, "red_b", x, [
        _chain(b, [(192, 1, 1, 0), (192, 3, 2, 0)]),
        _chain(b, [(256, 1, 1, 0), (256, K17, 1, P17), (320, K71, 1, P71), (320, 3, 2, 0)]),
        _pool_branch(b, "max", 2, 0),
    ])
    for i in range(3):
        x = _inception(b, f"inc_c{i}", x, [
            _chain(b, [(256, 1, 1, 0)]),
            _fork(b, [(384, 1, 1, 0)], [(256, K13, 1, P13), (256, K31, 1, P31)]),
            _fork(b, [(384, 1, 1, 0), (448, K31, 1, P31), (512, K13, 1, P13)],
                  [(256, K13, 1, P13), (256, K31, 1, P31)]),
            _pool_branch(b, "avg", 1, 1, proj=256),
        ])
    x = b.add("pool_final", "pool", x, mode="avg", **{"global": True})
    b.add("fc1000", "fc", x, c_out=1000)
    return b.to_dict()


def alexnet() -> dict:
    b = NetBuilder("alexnet", (3, 227, 227), notes=(
        "AlexNet (Krizhevsky et al. 2012) without the two-GPU channel grouping. Local "
        "response normalization positions are modeled as group norm layers; dropout omitted."))
    x = b.add("conv1", "conv", "input", c_out=96, kernel=11, stride=4, bias=True)
    x = b.add("relu1", "relu", x)
    x = b.add("norm1", "norm", x, type="gn", groups=32)
    x = b.add("pool1", "pool", x, mode="max", kernel=3, stride=2)
    x = b.add("conv2", "conv", x, c_out=256, kernel=5, pad=2, bias=True)
    x = b.add("relu2", "relu", x)
    x = b.add("norm2", "norm", x, type="gn", groups=32)
    x = b.add("pool2", "pool", x, mode="max", kernel=3, stride=2)
    for i, c in ((3, 384), (4, 384), (5, 256)):
        x = b.add(f"conv{i}", "conv", x, c_out=c, kernel=3, pad=1, bias=True)
        x = b.add(f"relu{i}", "relu", x)
    x = b.add("pool5", "pool", x, mode="max", kernel=3, stride=2)
    for i, c in ((6, 4096), (7, 4096)):
        x = b.add(f"fc{i}", "fc", x, c_out=c)
        x = b.add(f"relu{i}", "relu", x)
    b.add("fc8", "fc", x, c_out=1000)
    return b.to_dict()


BUILDERS = {"resnet50": resnet50, "inception_v3": inception_v3,
            "inception_v4": inception_v4, "alexnet": alexnet}


class _FlowListDumper(yaml.SafeDumper):
    pass


def _dump_layer_list(dumper, data):
    flow = all(not isinstance(v, (dict, list)) or
               (isinstance(v, list) and all(not isinstance(i, (dict, list)) for i in v))
               for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


def _dump_mapping(dumper, data):
    flat = "id" in data and "kind" in data and "branches" not in data
    return dumper.represent_mapping("tag:yaml.org,2002:map", data.items(), flow_style=flat)


_FlowListDumper.add_representer(list, _dump_layer_list)
_FlowListDumper.add_representer(dict, _dump_mapping)


def dump_yaml(desc: dict) -> str:
    return yaml.dump(desc, Dumper=_FlowListDumper, sort_keys=False, width=110)


def main(argv: list[str] | None = None) -> int:
    out_dir = Path(argv[0]) if argv else Path(__file__).parent / "networks"
    for name, fn in BUILDERS.items():
        text = "# generated by python -m wavecore.ir.zoo; grammar in docs/network_format.md\n"
        text += dump_yaml(fn())
        (out_dir / f"{name}.yaml").write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
