"""Per-sample on-chip footprints of layers and multi-branch blocks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..ir.graph import NetworkGraph, Unit
from ..ir.types import BlockKind, BlockNode, LayerKind, LayerNode, Precision

_ELEMENTWISE = (LayerKind.ACTIVATION, LayerKind.NORM)


class FootprintMode(str, enum.Enum):
    PLAIN = "plain"          # layer by layer, nothing shared across branches
    RESIDUAL = "residual"    # block input / output kept across branches
    INCEPTION = "inception"


@dataclass(frozen=True)
class BlockFootprint:
    block_id: str
    mode: FootprintMode
    per_sample_bytes: int


def works_in_place(net: NetworkGraph | None, layer: LayerNode) -> bool:
    """ReLU and GN may overwrite their input when nothing else reads it."""
    if layer.kind not in _ELEMENTWISE or net is None:
        return False
    return len(layer.input_ids) == 1 and net.consumers(layer.input_ids[0]) == (layer.id,)


def layer_footprint(layer: LayerNode, precision: Precision = Precision(),
                    net: NetworkGraph | None = None, inplace: bool = False) -> int:
    """Bytes per sample to hold a layer's inputs and output at once.

    With ``inplace`` (and the graph, to check the input has no other reader)
    ReLU and GN layers count their output as sharing the input's storage.
    """
    d_in, d_out = layer_io(layer, precision.feature_bytes, net, inplace)
    return d_in + d_out


def layer_io(layer: LayerNode, fb: int, net: NetworkGraph | None = None,
             inplace: bool = False) -> tuple[int, int]:
    d_out = 0 if inplace and works_in_place(net, layer) else layer.output_elements * fb
    return layer.input_elements * fb, d_out


def residual_terms(net: NetworkGraph, block: BlockNode, precision: Precision = Precision(),
                   inplace: bool = False):
    """All (branch, position, D_in, D_out, D_cond) terms of the residual footprint.

    Branch 1 is the main path.  Branch 2 is the shortcut; its positions are
    its own layers followed by the merge add, which reads the shortcut value
    and writes the block output while the main path result stays resident.
    """
    if block.kind is not BlockKind.RESIDUAL:
        raise ValueError(f"{block.id} is not a residual block")
    fb = precision.feature_bytes
    block_in = net.shape_of(block.split_input_id).element_count * fb
    block_out = net[block.merge_id].output_elements * fb
    main, shortcut = block.branches
    terms = []
    for l, lid in enumerate(main, start=1):
        d_in, d_out = layer_io(net[lid], fb, net, inplace)
        terms.append((1, l, d_in, d_out, block_in if l != 1 else 0))
    for l, lid in enumerate(shortcut, start=1):
        d_in, d_out = layer_io(net[lid], fb, net, inplace)
        terms.append((2, l, d_in, d_out, block_out))
    shortcut_out = net[shortcut[-1]].output_elements * fb if shortcut else block_in
    terms.append((2, len(shortcut) + 1, shortcut_out, block_out, block_out))
    return terms


def residual_block_footprint(net: NetworkGraph, block: BlockNode, precision: Precision = Precision(),
                             inplace: bool = False) -> int:
    return max(d_in + d_out + cond for *_, d_in, d_out, cond in residual_terms(net, block, precision, inplace))


def inception_terms(net: NetworkGraph, block: BlockNode, precision: Precision = Precision(),
                    inplace: bool = False):
    """(branch, position, D_in, D_out, D_cond) terms of the inception footprint.

    L is the length of the longest branch: the block input is held until every
    branch has consumed it, and space for the concatenated output is reserved
    until the final position.  The concat itself is in place and costs nothing.
    """
    if block.kind is not BlockKind.INCEPTION:
        raise ValueError(f"{block.id} is not an inception block")
    fb = precision.feature_bytes
    block_in = net.shape_of(block.split_input_id).element_count * fb
    block_out = net[block.merge_id].output_elements * fb
    depth = max(len(br) for br in block.branches)
    terms = []
    for b, branch in enumerate(block.branches, start=1):
        for l, lid in enumerate(branch, start=1):
            d_in, d_out = layer_io(net[lid], fb, net, inplace)
            cond = (block_in if l != 1 else 0) + (block_out if l != depth else 0)
            terms.append((b, l, d_in, d_out, cond))
    return terms


def inception_block_footprint(net: NetworkGraph, block: BlockNode, precision: Precision = Precision(),
                              inplace: bool = False) -> int:
    return max(d_in + d_out + cond for *_, d_in, d_out, cond in inception_terms(net, block, precision, inplace))


def block_footprint(net: NetworkGraph, block: BlockNode, mode: FootprintMode,
                    precision: Precision = Precision(), inplace: bool = False) -> BlockFootprint:
    if mode is FootprintMode.PLAIN:
        size = max(layer_footprint(net[lid], precision, net, inplace) for lid in block.layer_ids)
    elif mode is FootprintMode.RESIDUAL:
        size = residual_block_footprint(net, block, precision, inplace)
    else:
        size = inception_block_footprint(net, block, precision, inplace)
    return BlockFootprint(block.id, mode, size)


def unit_footprint(net: NetworkGraph, unit: Unit, block_mode: bool, precision: Precision = Precision(),
                   inplace: bool = False) -> int:
    if not unit.is_block:
        return layer_footprint(net[unit.id], precision, net, inplace)
    if not block_mode:
        mode = FootprintMode.PLAIN
    elif unit.block.kind is BlockKind.RESIDUAL:
        mode = FootprintMode.RESIDUAL
    else:
        mode = FootprintMode.INCEPTION
    return block_footprint(net, unit.block, mode, precision, inplace).per_sample_bytes


def max_subbatch(footprint_per_sample: int, buffer: int) -> int:
    if footprint_per_sample <= 0:
        raise ValueError("footprint must be positive")
    return max(buffer // footprint_per_sample, 0)
