"""Event-by-event replay of forward-pass feature traffic.

Walks every group, every sub-batch iteration and every layer, keeping an
explicit set of tensors resident in the global buffer, and logs each DRAM
read and write it has to issue.  Totals are compared against the closed-form
ledger in ``wavecore.mbs.traffic``; the log also makes the conservation
property checkable: every tensor written at a group boundary is read back
exactly once per consumer that cannot find it on chip.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..ir.graph import INPUT_ID, NetworkGraph
from ..ir.types import LayerKind, Precision
from ..mbs.types import ExecConfig, MbsSchedule


@dataclass(frozen=True)
class DramEvent:
    op: str          # "read" or "write"
    tensor: str
    layer: str       # issuing layer
    group: int
    iteration: int
    nbytes: int


def _visible(net: NetworkGraph, order: dict[str, int], block_mode: bool, src: str, dst: str) -> bool:
    if order.get(dst) == order.get(src, -10) + 1:
        return True
    if block_mode:
        unit = net.unit_of(dst)
        return unit.is_block and (src in unit.layer_ids or src == unit.block.split_input_id)
    return False


def forward_event_log(net: NetworkGraph, schedule: MbsSchedule,
                      precision: Precision = Precision()) -> list[DramEvent]:
    fb = precision.feature_bytes
    block_mode = ExecConfig(schedule.config).block_mode
    events: list[DramEvent] = []
    for gi, group in enumerate(schedule.groups):
        order = {lid: i for i, lid in enumerate(group.layer_ids)}
        it = 0
        for samples, count in group.iteration_sizes(schedule.mini_batch):
            for _ in range(count):
                resident: set[str] = set()

                def size(tid: str) -> int:
                    return net.shape_of(tid).element_count * samples * fb

                for lid in group.layer_ids:
                    layer = net[lid]
                    # a block-mode concat is assembled in place from resident branch outputs
                    in_place = layer.kind is LayerKind.CONCAT and block_mode
                    passes = 2 if layer.kind is LayerKind.NORM else 1
                    for src in () if in_place else layer.input_ids:
                        hit = (group.resident and src in resident
                               and _visible(net, order, block_mode, src, lid))
                        if not hit:
                            # a resident group stages the second pass on chip
                            reads = 1 if group.resident else passes
                            for _ in range(reads):
                                events.append(DramEvent("read", src, lid, gi, it, size(src)))
                    if group.resident:
                        resident.add(lid)
                    cons = net.consumers(lid)
                    leaves = not cons or any(
                        not (group.resident and c in order and _visible(net, order, block_mode, lid, c))
                        for c in cons)
                    if layer.checkpoint or leaves:
                        events.append(DramEvent("write", lid, lid, gi, it, size(lid)))
                it += 1
    return events


def totals(events: list[DramEvent]) -> Counter:
    out: Counter = Counter()
    for e in events:
        out[e.op] += e.nbytes
    return out


def conservation_violations(net: NetworkGraph, mini_batch: int, events: list[DramEvent],
                            precision: Precision = Precision()) -> list[str]:
    """Tensors not written exactly once, or read a wrong amount by some consumer.

    Checked in bytes over the whole mini-batch, since producer and consumer
    groups may split the samples differently.
    """
    written: Counter = Counter()
    read: Counter = Counter()
    for e in events:
        if e.op == "write":
            written[e.tensor] += e.nbytes
        else:
            read[(e.tensor, e.layer)] += e.nbytes
    full = {t: net.shape_of(t).element_count * mini_batch * precision.feature_bytes
            for t in set(written) | {t for t, _ in read}}
    problems = []
    for tensor, nbytes in written.items():
        if nbytes != full[tensor]:
            problems.append(f"{tensor}: wrote {nbytes} B, expected {full[tensor]} B (once)")
    for (tensor, layer), nbytes in read.items():
        if tensor != INPUT_ID and tensor not in written:
            problems.append(f"{layer} reads {tensor}, which never reached DRAM")
        passes = 2 if net[layer].kind is LayerKind.NORM else 1
        if nbytes not in (full[tensor], passes * full[tensor]):
            problems.append(f"{layer} read {nbytes} B of {tensor}, expected {full[tensor]} B")
    return problems
