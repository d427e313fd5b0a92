"""Network graph construction, validation and shape inference."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .types import (
    BlockKind,
    BlockNode,
    ConvSpec,
    CycleError,
    LayerKind,
    LayerNode,
    SchemaError,
    ShapeMismatchError,
    TensorShape,
)

INPUT_ID = "input"

_PARAM_KEYS = {
    LayerKind.CONV: {"c_out", "kernel", "stride", "pad", "bias"},
    LayerKind.FC: {"c_out", "bias"},
    LayerKind.POOL: {"mode", "kernel", "stride", "pad", "global"},
    LayerKind.NORM: {"type", "groups"},
    LayerKind.ACTIVATION: set(),
    LayerKind.ADD: set(),
    LayerKind.CONCAT: set(),
}


@dataclass(frozen=True)
class Unit:
    """Scheduling atom: a plain layer or a whole multi-branch block."""

    id: str
    layer_ids: tuple[str, ...]
    block: BlockNode | None = None

    @property
    def is_block(self) -> bool:
        return self.block is not None


class NetworkGraph:
    """Immutable, validated CNN description.

    ``layers`` iterates in schedule order: topological, with every block
    emitted contiguously as branch 1, branch 2, ..., merge.
    """

    def __init__(self, name: str, input_shape: TensorShape, layers: Iterable[LayerNode],
                 blocks: Iterable[BlockNode], units: Iterable[Unit]):
        self.name = name
        self.input_shape = input_shape
        self._layers = {l.id: l for l in layers}
        self.blocks = tuple(blocks)
        self.units = tuple(units)
        consumers: dict[str, list[str]] = {INPUT_ID: []}
        for lid in self._layers:
            consumers[lid] = []
        for l in self._layers.values():
            for src in l.input_ids:
                consumers[src].append(l.id)
        self._consumers = {k: tuple(v) for k, v in consumers.items()}
        self._block_of = {lid: b for b in self.blocks for lid in b.layer_ids}
        self._unit_of = {lid: u for u in self.units for lid in u.layer_ids}

    def __repr__(self):
        return f"NetworkGraph({self.name!r}, {len(self._layers)} layers, {len(self.blocks)} blocks)"

    def __len__(self):
        return len(self._layers)

    def __iter__(self):
        return iter(self._layers.values())

    def __getitem__(self, layer_id: str) -> LayerNode:
        return self._layers[layer_id]

    def __contains__(self, layer_id: str) -> bool:
        return layer_id in self._layers

    @property
    def layers(self) -> tuple[LayerNode, ...]:
        return tuple(self._layers.values())

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return tuple(self._layers)

    def consumers(self, tensor_id: str) -> tuple[str, ...]:
        return self._consumers[tensor_id]

    def shape_of(self, tensor_id: str) -> TensorShape:
        if tensor_id == INPUT_ID:
            return self.input_shape
        return self._layers[tensor_id].output_shape

    def block_of(self, layer_id: str) -> BlockNode | None:
        return self._block_of.get(layer_id)

    def unit_of(self, layer_id: str) -> Unit:
        return self._unit_of[layer_id]

    def gemm_layers(self) -> list[LayerNode]:
        return [l for l in self._layers.values() if l.kind.is_gemm]

    def count(self, kind: LayerKind) -> int:
        return sum(1 for l in self._layers.values() if l.kind is kind)


def _pair(value: Any, what: str, layer_id: str) -> tuple[int, int]:
    if isinstance(value, bool):
        raise SchemaError(f"{what} must be an int or [h, w]", layer_id)
    if isinstance(value, int):
        return value, value
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, int) for v in value):
        return int(value[0]), int(value[1])
    raise SchemaError(f"{what} must be an int or [h, w], got {value!r}", layer_id)


def _parse_input(raw: Any) -> TensorShape:
    if isinstance(raw, Mapping):
        try:
            return TensorShape(1, int(raw["c"]), int(raw["h"]), int(raw["w"]))
        except KeyError as exc:
            raise SchemaError(f"network input missing key {exc}") from None
    if isinstance(raw, (list, tuple)) and len(raw) == 3:
        return TensorShape(1, *map(int, raw))
    raise SchemaError(f"network input must be [c, h, w] or {{c, h, w}}, got {raw!r}")


def _conv_spec(lid: str, kind: LayerKind, p: Mapping[str, Any], ins: list[TensorShape]) -> ConvSpec:
    if "c_out" not in p or not isinstance(p["c_out"], int) or p["c_out"] < 1:
        raise SchemaError("requires positive integer 'c_out'", lid)
    src = ins[0]
    if kind is LayerKind.FC:
        # FC is a 1x1 conv over the flattened input
        return ConvSpec(src.c * src.h * src.w, p["c_out"], has_bias=bool(p.get("bias", True)))
    r, s = _pair(p.get("kernel", 1), "kernel", lid)
    ph, pw = _pair(p.get("pad", 0), "pad", lid)
    stride = p.get("stride", 1)
    if not isinstance(stride, int):
        raise SchemaError("stride must be an int", lid)
    try:
        return ConvSpec(src.c, p["c_out"], r, s, stride, ph, pw, bool(p.get("bias", False)))
    except ValueError as exc:
        raise SchemaError(str(exc), lid) from None


def _infer(lid: str, kind: LayerKind, p: Mapping[str, Any], ins: list[TensorShape],
           input_ids: list[str]) -> tuple[TensorShape, ConvSpec | None]:
    if kind in (LayerKind.CONV, LayerKind.FC, LayerKind.POOL, LayerKind.NORM, LayerKind.ACTIVATION):
        if len(ins) != 1:
            raise SchemaError(f"{kind.value} takes exactly one input, got {len(ins)}", lid)
    src = ins[0]
    if kind is LayerKind.CONV:
        spec = _conv_spec(lid, kind, p, ins)
        ho, wo = spec.output_hw(src.h, src.w)
        if ho < 1 or wo < 1:
            raise ShapeMismatchError(f"conv output would be {ho}x{wo}", lid)
        return TensorShape(1, spec.c_out, ho, wo), spec
    if kind is LayerKind.FC:
        spec = _conv_spec(lid, kind, p, ins)
        return TensorShape(1, spec.c_out, 1, 1), spec
    if kind is LayerKind.POOL:
        if p.get("mode", "max") not in ("max", "avg"):
            raise SchemaError(f"pool mode must be max or avg, got {p.get('mode')!r}", lid)
        if p.get("global", False):
            return TensorShape(1, src.c, 1, 1), None
        if "kernel" not in p:
            raise SchemaError("pool requires 'kernel' unless global", lid)
        r, s = _pair(p["kernel"], "kernel", lid)
        ph, pw = _pair(p.get("pad", 0), "pad", lid)
        stride = p.get("stride", r)
        ho = (src.h + 2 * ph - r) // stride + 1
        wo = (src.w + 2 * pw - s) // stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatchError(f"pool output would be {ho}x{wo}", lid)
        return TensorShape(1, src.c, ho, wo), None
    if kind is LayerKind.NORM:
        ntype = p.get("type", "gn")
        if ntype not in ("gn", "bn"):
            raise SchemaError(f"norm type must be gn or bn, got {ntype!r}", lid)
        groups = p.get("groups", 32)
        if ntype == "gn" and (not isinstance(groups, int) or groups < 1 or src.c % groups):
            raise SchemaError(f"gn groups={groups!r} must divide {src.c} channels", lid)
        return src, None
    if kind is LayerKind.ACTIVATION:
        return src, None
    if kind is LayerKind.ADD:
        if len(ins) < 2:
            raise SchemaError("add needs at least two inputs", lid)
        for other_id, other in zip(input_ids[1:], ins[1:]):
            if other != src:
                raise ShapeMismatchError(
                    f"add inputs {input_ids[0]!r} {tuple(vars(src).values())} and "
                    f"{other_id!r} {tuple(vars(other).values())} differ", lid)
        return src, None
    # concat
    if len(ins) < 2:
        raise SchemaError("concat needs at least two inputs", lid)
    for other_id, other in zip(input_ids[1:], ins[1:]):
        if (other.h, other.w) != (src.h, src.w):
            raise ShapeMismatchError(
                f"concat inputs {input_ids[0]!r} ({src.h}x{src.w}) and {other_id!r} "
                f"({other.h}x{other.w}) disagree spatially", lid)
    return TensorShape(1, sum(s.c for s in ins), src.h, src.w), None


def _toposort(raw_layers: list[dict]) -> list[dict]:
    by_id = {l["id"]: l for l in raw_layers}
    indeg = {lid: 0 for lid in by_id}
    users: dict[str, list[str]] = {lid: [] for lid in by_id}
    for l in raw_layers:
        for src in l["inputs"]:
            if src == INPUT_ID:
                continue
            if src not in by_id:
                raise SchemaError(f"unknown input {src!r}", l["id"])
            indeg[l["id"]] += 1
            users[src].append(l["id"])
    order_index = {l["id"]: i for i, l in enumerate(raw_layers)}
    ready = sorted((lid for lid, d in indeg.items() if d == 0), key=order_index.get)
    out = []
    while ready:
        lid = ready.pop(0)
        out.append(by_id[lid])
        newly = []
        for u in users[lid]:
            indeg[u] -= 1
            if indeg[u] == 0:
                newly.append(u)
        ready = sorted(ready + newly, key=order_index.get)
    if len(out) != len(raw_layers):
        stuck = sorted((lid for lid, d in indeg.items() if d > 0), key=order_index.get)
        raise CycleError("cycle detected", stuck[0])
    return out


def _parse_blocks(raw_blocks: list, layers: dict[str, LayerNode]) -> list[BlockNode]:
    blocks = []
    owned: dict[str, str] = {}
    for raw in raw_blocks:
        if not isinstance(raw, Mapping):
            raise SchemaError(f"block entry must be a mapping, got {raw!r}")
        bid = raw.get("id")
        if not isinstance(bid, str):
            raise SchemaError("block requires string 'id'")
        extra = set(raw) - {"id", "kind", "split", "branches", "merge"}
        if extra:
            raise SchemaError(f"block {bid!r}: unknown keys {sorted(extra)}")
        try:
            kind = BlockKind(raw.get("kind"))
        except ValueError:
            raise SchemaError(f"block {bid!r}: kind must be residual or inception") from None
        split, merge = raw.get("split"), raw.get("merge")
        branches = tuple(tuple(br) for br in raw.get("branches", ()))
        if merge not in layers:
            raise SchemaError(f"block {bid!r}: unknown merge layer {merge!r}")
        if split != INPUT_ID and split not in layers:
            raise SchemaError(f"block {bid!r}: unknown split {split!r}")
        block = BlockNode(bid, kind, branches, split, merge)
        if kind is BlockKind.RESIDUAL and len(branches) != 2:
            raise SchemaError(f"block {bid!r}: residual needs exactly 2 branches")
        if kind is BlockKind.INCEPTION and len(branches) < 2:
            raise SchemaError(f"block {bid!r}: inception needs at least 2 branches")
        if layers[merge].kind is not block.merge_op:
            raise SchemaError(f"block {bid!r}: merge must be {block.merge_op.value}", merge)
        members = set(block.layer_ids)
        for lid in block.layer_ids:
            if lid not in layers:
                raise SchemaError(f"block {bid!r}: unknown layer {lid!r}")
            if lid in owned:
                raise SchemaError(f"belongs to blocks {owned[lid]!r} and {bid!r}", lid)
            owned[lid] = bid
        ends = []
        for bi, br in enumerate(branches):
            if not br:
                if kind is not BlockKind.RESIDUAL or bi == 0:
                    raise SchemaError(f"block {bid!r}: only a residual shortcut may be empty")
                ends.append(split)
                continue
            if split not in layers[br[0]].input_ids or len(layers[br[0]].input_ids) != 1:
                raise SchemaError(f"branch start must consume only split {split!r}", br[0])
            seen = {split}
            used = set()
            for lid in br:
                for src in layers[lid].input_ids:
                    if src not in seen:
                        raise SchemaError(f"input {src!r} is outside its branch of block {bid!r}", lid)
                    used.add(src)
                seen.add(lid)
            # a branch may fork near its end; every unconsumed layer feeds the merge
            ends.extend(lid for lid in br if lid not in used)
        if sorted(layers[merge].input_ids) != sorted(ends):
            raise SchemaError(f"merge must consume the branch outputs {ends}", merge)
        for lid in members - {merge}:
            for user_layer in layers.values():
                if lid in user_layer.input_ids and user_layer.id not in members:
                    raise SchemaError(f"output escapes block {bid!r} to {user_layer.id!r}", lid)
        blocks.append(block)
    return blocks


def build_graph(desc: Mapping[str, Any]) -> NetworkGraph:
    """Validate a raw description (as loaded from a network file) into a graph."""
    if not isinstance(desc, Mapping):
        raise SchemaError("network description must be a mapping")
    extra = set(desc) - {"name", "input", "layers", "blocks", "notes"}
    if extra:
        raise SchemaError(f"unknown top-level keys {sorted(extra)}")
    name = str(desc.get("name", "network"))
    if "input" not in desc:
        raise SchemaError("missing 'input'")
    input_shape = _parse_input(desc["input"])
    raw_layers_in = desc.get("layers") or []
    if not isinstance(raw_layers_in, list):
        raise SchemaError("'layers' must be a list")

    raw_layers = []
    seen_ids = set()
    prev = INPUT_ID
    for entry in raw_layers_in:
        if not isinstance(entry, Mapping):
            raise SchemaError(f"layer entry must be a mapping, got {entry!r}")
        lid = entry.get("id")
        if not isinstance(lid, str) or not lid:
            raise SchemaError(f"layer requires a string 'id': {dict(entry)!r}")
        if lid == INPUT_ID or lid in seen_ids:
            raise SchemaError("duplicate or reserved id", lid)
        seen_ids.add(lid)
        try:
            kind = LayerKind(entry.get("kind"))
        except ValueError:
            raise SchemaError(f"unknown kind {entry.get('kind')!r}", lid) from None
        inputs = entry.get("inputs", [prev])
        if isinstance(inputs, str):
            inputs = [inputs]
        if not isinstance(inputs, list) or not inputs or not all(isinstance(i, str) for i in inputs):
            raise SchemaError("'inputs' must be a non-empty list of ids", lid)
        params = {k: v for k, v in entry.items() if k not in ("id", "kind", "inputs")}
        unknown = set(params) - _PARAM_KEYS[kind]
        if unknown:
            raise SchemaError(f"unknown params {sorted(unknown)} for {kind.value}", lid)
        raw_layers.append({"id": lid, "kind": kind, "inputs": list(inputs), "params": params})
        prev = lid

    ordered = _toposort(raw_layers)
    shapes: dict[str, TensorShape] = {INPUT_ID: input_shape}
    kinds: dict[str, LayerKind] = {}
    consumers: dict[str, list[str]] = {INPUT_ID: []}
    for l in ordered:
        consumers[l["id"]] = []
        for src in l["inputs"]:
            consumers[src].append(l["id"])
        kinds[l["id"]] = l["kind"]

    staged: dict[str, LayerNode] = {}
    for l in ordered:
        lid, kind = l["id"], l["kind"]
        ins = [shapes[s] for s in l["inputs"]]
        out, spec = _infer(lid, kind, l["params"], ins, l["inputs"])
        shapes[lid] = out
        ckpt = any(kinds[c] in (LayerKind.CONV, LayerKind.FC, LayerKind.NORM) for c in consumers[lid])
        staged[lid] = LayerNode(
            id=lid, kind=kind, params=MappingProxyType(dict(l["params"])),
            input_ids=tuple(l["inputs"]), output_shape=out, input_shapes=tuple(ins),
            checkpoint=ckpt, needs_input_grad=any(s != INPUT_ID for s in l["inputs"]),
            conv=spec)

    blocks = _parse_blocks(list(desc.get("blocks") or []), staged)
    block_of = {lid: b for b in blocks for lid in b.layer_ids}

    # schedule order: topological, blocks contiguous and branch-major
    order: list[str] = []
    units: list[Unit] = []
    emitted: set[str] = set()
    for l in ordered:
        lid = l["id"]
        if lid in emitted:
            continue
        blk = block_of.get(lid)
        ids = blk.layer_ids if blk else (lid,)
        for member in ids:
            for src in staged[member].input_ids:
                if src != INPUT_ID and src not in emitted and src not in ids[: ids.index(member)]:
                    raise SchemaError(f"input {src!r} not available in schedule order", member)
        order.extend(ids)
        emitted.update(ids)
        units.append(Unit(blk.id if blk else lid, tuple(ids), blk))
    return NetworkGraph(name, input_shape, (staged[i] for i in order), blocks, units)
