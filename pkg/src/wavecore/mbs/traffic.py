"""DRAM and global-buffer traffic of one training step under a schedule.

Accounting rules, per layer and per phase:

* A feature edge (producer -> consumer) stays on chip only when both layers sit
  in the same resident group and the consumer can still find the value in the
  buffer: it is the next layer in schedule order, or the consumer belongs to a
  block processed in block mode and the producer is that block's split input
  or another member.  Off-chip edges cost one DRAM write by the producer
  (shared by all off-chip consumers) and one DRAM read per consumer.
* Tensors consumed by conv, fc or norm layers are checkpoints: written to DRAM
  in the forward pass whatever the schedule and read back in backward.
* Backward gradient edges mirror the forward edges.
* Conv/FC backward streams dOut twice (data and weight gradient GEMMs) and norm
  forward streams its input twice (statistics, then normalize); a resident
  group stages the second pass in the global buffer.
* Weights are read from DRAM once per iteration in each direction; the data
  and weight gradient GEMMs share the backward copy.  Weight-gradient partial
  sums are written every iteration and read back on every iteration but the
  first.  ``wgrad_dram`` is the share of backward traffic that belongs to the
  weight-gradient GEMM: partial sums, the saved input and its own dOut pass.  GN scale/shift live in the buffer reserve.
* MBS configurations store a 1-bit mask for ReLU and max-pool backward; the
  others re-read the full-precision activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping

from ..ir.graph import INPUT_ID, NetworkGraph
from ..ir.types import LayerKind, LayerNode, Precision
from .types import ExecConfig, LayerGroup

CATEGORIES = (
    "features_in",
    "features_out",
    "weights",
    "weight_grad_rw",
    "checkpoints_fwd_write",
    "checkpoints_bwd_read",
    "relu_grad_bits",
    "norm_params",
)

_SAVES_INPUT = (LayerKind.CONV, LayerKind.FC, LayerKind.NORM)


@dataclass
class TrafficLedger:
    features_in: int = 0
    features_out: int = 0
    weights: int = 0
    weight_grad_rw: int = 0
    checkpoints_fwd_write: int = 0
    checkpoints_bwd_read: int = 0
    relu_grad_bits: int = 0
    norm_params: int = 0

    @property
    def total(self) -> int:
        return sum(getattr(self, c) for c in CATEGORIES)

    def __add__(self, other: "TrafficLedger") -> "TrafficLedger":
        return TrafficLedger(**{c: getattr(self, c) + getattr(other, c) for c in CATEGORIES})

    def __iadd__(self, other: "TrafficLedger") -> "TrafficLedger":
        for c in CATEGORIES:
            setattr(self, c, getattr(self, c) + getattr(other, c))
        return self

    def scaled(self, factor: int) -> "TrafficLedger":
        return TrafficLedger(**{c: getattr(self, c) * factor for c in CATEGORIES})

    def as_dict(self) -> dict[str, int]:
        return {c: getattr(self, c) for c in CATEGORIES}

    @classmethod
    def sum(cls, ledgers: Iterable["TrafficLedger"]) -> "TrafficLedger":
        out = cls()
        for l in ledgers:
            out += l
        return out


assert tuple(f.name for f in fields(TrafficLedger)) == CATEGORIES


@dataclass
class LayerTraffic:
    layer_id: str
    forward: TrafficLedger = field(default_factory=TrafficLedger)
    backward: TrafficLedger = field(default_factory=TrafficLedger)
    gbuf_forward: int = 0
    gbuf_backward: int = 0
    # part of ``backward`` moved while the weight-gradient GEMM runs
    wgrad_dram: int = 0

    @property
    def dram(self) -> int:
        return self.forward.total + self.backward.total

    @property
    def gbuf(self) -> int:
        return self.gbuf_forward + self.gbuf_backward


def _bits(elements: int, bits: int) -> int:
    return -(-elements * bits // 8)


class TrafficModel:
    """Per-layer traffic for a network, configuration and mini-batch size."""

    def __init__(self, net: NetworkGraph, config: ExecConfig, mini_batch: int,
                 precision: Precision = Precision()):
        self.net = net
        self.config = config
        self.mini_batch = mini_batch
        self.precision = precision
        self._pos = {lid: i for i, lid in enumerate(net.layer_ids)}

    # -- helpers -----------------------------------------------------------
    def tensor_bytes(self, tid: str) -> int:
        return self.net.shape_of(tid).element_count * self.mini_batch * self.precision.feature_bytes

    def on_chip(self, src: str, dst: str, group_of: Mapping[str, LayerGroup]) -> bool:
        if src == INPUT_ID:
            return False
        g = group_of[src]
        if not g.resident or group_of[dst] is not g:
            return False
        if self._pos[dst] == self._pos[src] + 1:
            return True
        if self.config.block_mode:
            unit = self.net.unit_of(dst)
            if unit.is_block and (src in unit.layer_ids or src == unit.block.split_input_id):
                return True
        return False

    def in_dram(self, tid: str, group_of: Mapping[str, LayerGroup]) -> bool:
        if tid == INPUT_ID:
            return True
        layer = self.net[tid]
        cons = self.net.consumers(tid)
        return layer.checkpoint or not cons or any(not self.on_chip(tid, c, group_of) for c in cons)

    def _inplace_concat(self, layer: LayerNode) -> bool:
        return layer.kind is LayerKind.CONCAT and self.config.block_mode

    def _shared_saved_read(self, src: str, lid: str, group_of) -> bool:
        """True when an earlier on-chip consumer already brought ``src`` back in backward."""
        if not self.on_chip(src, lid, group_of):
            return False
        for c in self.net.consumers(src):
            if c == lid:
                return False
            if self.net[c].kind in _SAVES_INPUT and self.on_chip(src, c, group_of):
                return True
        return False

    # -- main --------------------------------------------------------------
    def layer_traffic(self, lid: str, group_of: Mapping[str, LayerGroup]) -> LayerTraffic:
        net, p = self.net, self.precision
        layer = net[lid]
        group = group_of[lid]
        iters = group.iterations
        n = self.mini_batch
        out = LayerTraffic(lid)
        fwd, bwd = out.forward, out.backward
        kind = layer.kind
        mbs = self.config.is_mbs
        inplace = self._inplace_concat(layer)
        out_bytes = self.tensor_bytes(lid)
        consumers = net.consumers(lid)

        # forward: inputs
        if not inplace:
            passes = 2 if kind is LayerKind.NORM else 1
            for src in layer.input_ids:
                size = self.tensor_bytes(src)
                if self.on_chip(src, lid, group_of):
                    out.gbuf_forward += passes * size
                elif passes == 2 and group.resident:
                    fwd.features_in += size
                    out.gbuf_forward += 2 * size  # staged, then re-read
                else:
                    fwd.features_in += passes * size
        # forward: output
        on_cons = [c for c in consumers if self.on_chip(lid, c, group_of)]
        if layer.checkpoint:
            fwd.checkpoints_fwd_write += out_bytes
        elif len(on_cons) < len(consumers) or not consumers:
            fwd.features_out += out_bytes
        if on_cons and not inplace:
            out.gbuf_forward += out_bytes

        # metadata for ReLU / max-pool backward
        pool_max = kind is LayerKind.POOL and layer.params.get("mode", "max") == "max"
        if kind is LayerKind.ACTIVATION or pool_max:
            tid = lid if kind is LayerKind.ACTIVATION else layer.input_ids[0]
            elems = net.shape_of(tid).element_count * n
            if mbs:
                mask = _bits(elems, p.relu_grad_bits)
                fwd.relu_grad_bits += mask
                bwd.relu_grad_bits += mask
            else:
                if not self.in_dram(tid, group_of):
                    fwd.relu_grad_bits += self.tensor_bytes(tid)
                bwd.relu_grad_bits += self.tensor_bytes(tid)

        # parameters
        if kind.is_gemm:
            wbytes = layer.weight_count * p.weight_bytes
            fwd.weights += wbytes * iters
            bwd.weights += wbytes * iters
            bwd.weight_grad_rw += wbytes * (2 * iters - 1)
        elif kind is LayerKind.NORM:
            pbytes = layer.norm_param_count * p.weight_bytes
            fwd.norm_params += pbytes
            bwd.norm_params += pbytes  # gradient written once
            out.gbuf_forward += pbytes * iters
            out.gbuf_backward += 2 * pbytes * iters

        # backward: incoming gradient
        if not inplace:
            reads = 2 if kind.is_gemm and layer.needs_input_grad else 1
            if not consumers:
                out.gbuf_backward += reads * out_bytes  # loss gradient arrives on chip
            for c in consumers:
                if self.on_chip(lid, c, group_of):
                    out.gbuf_backward += reads * out_bytes
                elif reads == 2 and group.resident:
                    bwd.features_in += out_bytes
                    out.gbuf_backward += 2 * out_bytes
                else:
                    bwd.features_in += reads * out_bytes
                    if reads == 2:
                        out.wgrad_dram += out_bytes
            # backward: outgoing gradients
            if layer.needs_input_grad:
                for src in layer.input_ids:
                    if src == INPUT_ID:
                        continue
                    size = self.tensor_bytes(src)
                    if self.on_chip(src, lid, group_of):
                        out.gbuf_backward += size
                    else:
                        bwd.features_out += size
        # backward: saved tensors
        if kind in _SAVES_INPUT:
            for src in layer.input_ids:
                if not self._shared_saved_read(src, lid, group_of):
                    bwd.checkpoints_bwd_read += self.tensor_bytes(src)
                else:
                    out.gbuf_backward += self.tensor_bytes(src)
        if kind.is_gemm:
            if layer.needs_input_grad:
                out.wgrad_dram += bwd.weight_grad_rw + bwd.checkpoints_bwd_read
            else:
                out.wgrad_dram = bwd.total
        return out

    def all_layers(self, group_of: Mapping[str, LayerGroup]) -> list[LayerTraffic]:
        return [self.layer_traffic(lid, group_of) for lid in self.net.layer_ids]

    def dram_of(self, layer_ids: Iterable[str], group_of: Mapping[str, LayerGroup]) -> int:
        return sum(self.layer_traffic(lid, group_of).dram for lid in layer_ids)
