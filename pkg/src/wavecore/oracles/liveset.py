"""Event replay of on-chip buffer occupancy, one sample at a time.

Each layer executes as one event.  While it runs, the buffer holds its inputs,
its output and every earlier tensor that a later layer of the same scope will
still read from the buffer.  A tensor dies right after its last such reader
(reference counting).  Two refinements reproduce the buffer policies the
analytic footprints assume:

* ReLU and GN with ``inplace`` write over their input when nothing else
  reads it, so input and output share one storage slot.
* An inception block in block mode pins its input for the whole block and
  reserves the concatenated output region at every depth below the deepest
  branch's; branch results live inside that region, so the concat is free.

Peaks are per sample; multiply by the sub-batch for bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..ir.graph import NetworkGraph
from ..ir.types import BlockKind, BlockNode, LayerKind, Precision
from ..mbs.footprint import works_in_place
from ..mbs.types import LayerGroup

_REGION = "<concat region>"


@dataclass
class LiveSet:
    """Resident tensors (storage id -> bytes per sample) at each event."""

    events: list[tuple[str, dict[str, int]]] = field(default_factory=list)

    @property
    def peak_bytes(self) -> int:
        return max((sum(r.values()) for _, r in self.events), default=0)

    def peak_event(self) -> str | None:
        if not self.events:
            return None
        return max(self.events, key=lambda e: sum(e[1].values()))[0]


class _Replay:
    def __init__(self, net: NetworkGraph, precision: Precision, inplace: bool):
        self.net = net
        self.fb = precision.feature_bytes
        self.inplace = inplace

    def size(self, tid: str) -> int:
        return self.net.shape_of(tid).element_count * self.fb

    def storage(self, tid: str) -> str:
        while tid in self.net.layer_ids:
            layer = self.net[tid]
            if not (self.inplace and works_in_place(self.net, layer)):
                break
            tid = layer.input_ids[0]
        return tid

    def run(self, order: Sequence[str], keeps: Callable[[str, str], bool],
            extra: Callable[[str], dict[str, int]] = lambda lid: {},
            skip: Callable[[str], bool] = lambda lid: False) -> LiveSet:
        """``keeps(src, dst)``: does ``dst`` read ``src`` from the buffer?"""
        pos = {lid: i for i, lid in enumerate(order)}
        last_read: dict[str, int] = {}
        for i, lid in enumerate(order):
            for src in self.net[lid].input_ids:
                if keeps(src, lid):
                    last_read[src] = max(last_read.get(src, -1), i)
        live = LiveSet()
        for i, lid in enumerate(order):
            if skip(lid):
                continue
            res: dict[str, int] = {}
            for src in self.net[lid].input_ids:
                res[self.storage(src)] = self.size(src)
            res.setdefault(self.storage(lid), self.size(lid))
            for tid, j in last_read.items():
                born_before = tid not in pos or pos[tid] < i
                if born_before and j > i:
                    res.setdefault(self.storage(tid), self.size(tid))
            res.update(extra(lid))
            live.events.append((lid, res))
        return live


def _inception_policy(replay: _Replay, block: BlockNode):
    net = replay.net
    depth = max(len(br) for br in block.branches)
    level = {lid: l for br in block.branches for l, lid in enumerate(br, start=1)}
    split = block.split_input_id
    pinned = {replay.storage(split): replay.size(split)}
    region = {_REGION: net[block.merge_id].output_elements * replay.fb}

    def extra(lid: str) -> dict[str, int]:
        if lid not in level:
            return {}
        out = dict(pinned)
        if level[lid] != depth:
            out.update(region)
        return out

    def stored_in_region(src: str, dst: str) -> bool:
        return dst == block.merge_id

    return extra, stored_in_region


def replay_block(net: NetworkGraph, block: BlockNode, block_mode: bool = True,
                 precision: Precision = Precision(), inplace: bool = False) -> LiveSet:
    """Replay one block alone, branch by branch, then the merge."""
    replay = _Replay(net, precision, inplace)
    order = list(block.layer_ids)
    members = set(order) | {block.split_input_id}
    if not block_mode:
        pos = {lid: i for i, lid in enumerate(order)}
        return replay.run(order, lambda src, dst: src in pos and pos[dst] == pos[src] + 1)
    if block.kind is BlockKind.RESIDUAL:
        return replay.run(order, lambda src, dst: src in members)
    extra, in_region = _inception_policy(replay, block)
    return replay.run(order, lambda src, dst: src in members and not in_region(src, dst),
                      extra=extra, skip=lambda lid: lid == block.merge_id)


def replay_group(net: NetworkGraph, group: LayerGroup, on_chip: Callable[[str, str], bool],
                 block_mode: bool, precision: Precision = Precision(),
                 inplace: bool = False) -> LiveSet:
    """Replay a scheduled group; ``on_chip`` says which edges stay in the buffer."""
    replay = _Replay(net, precision, inplace)
    order = list(group.layer_ids)
    in_group = set(order)
    extras: dict[str, Callable[[str], dict[str, int]]] = {}
    region_edges: set[tuple[str, str]] = set()
    skipped: set[str] = set()
    if block_mode:
        for unit in net.units:
            if unit.is_block and unit.block.kind is BlockKind.INCEPTION and unit.id in group.member_ids:
                extra, _ = _inception_policy(replay, unit.block)
                merge = unit.block.merge_id
                for lid in unit.block.layer_ids:
                    extras[lid] = extra
                region_edges |= {(src, merge) for src in net[merge].input_ids}
                if net[merge].kind is LayerKind.CONCAT:
                    skipped.add(merge)

    def keeps(src: str, dst: str) -> bool:
        return (src in in_group and (src, dst) not in region_edges and on_chip(src, dst))

    return replay.run(order, keeps,
                      extra=lambda lid: extras[lid](lid) if lid in extras else {},
                      skip=lambda lid: lid in skipped)
