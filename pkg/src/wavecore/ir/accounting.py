"""Per-layer data volume and multiply counts."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .types import LayerKind, LayerNode, Precision


class Phase(str, enum.Enum):
    FORWARD = "forward"
    DATA_GRAD = "data_grad"
    WEIGHT_GRAD = "weight_grad"


@dataclass(frozen=True)
class LayerSizes:
    input_bytes: int
    output_bytes: int
    weight_bytes: int
    checkpoint_bytes: int


def layer_data_sizes(layer: LayerNode, samples: int, precision: Precision = Precision()) -> LayerSizes:
    fb = precision.feature_bytes
    out = layer.output_elements * samples * fb
    return LayerSizes(
        input_bytes=layer.input_elements * samples * fb,
        output_bytes=out,
        weight_bytes=layer.weight_count * precision.weight_bytes,
        checkpoint_bytes=out if layer.checkpoint else 0,
    )


def gemm_dims(layer: LayerNode, samples: int, phase: Phase = Phase.FORWARD) -> tuple[int, int, int]:
    """(g_h, g_w, k) of the im2col GEMM for one training phase."""
    if not layer.kind.is_gemm or layer.conv is None:
        raise ValueError(f"{layer.id}: {layer.kind.value} layers have no GEMM")
    spec = layer.conv
    src = layer.input_shapes[0]
    if layer.kind is LayerKind.FC:
        hi = wi = ho = wo = 1
    else:
        hi, wi = src.h, src.w
        ho, wo = layer.output_shape.h, layer.output_shape.w
    rs = spec.r * spec.s
    if phase is Phase.FORWARD:
        return samples * ho * wo, spec.c_out, spec.c_in * rs
    if phase is Phase.DATA_GRAD:
        return samples * hi * wi, spec.c_in, spec.c_out * rs
    return spec.c_in * rs, spec.c_out, samples * ho * wo


def conv_macs(layer: LayerNode, samples: int, phase: Phase = Phase.FORWARD) -> int:
    g_h, g_w, k = gemm_dims(layer, samples, phase)
    return g_h * g_w * k


def reusable_fraction(layers, samples: int, buffer: int, precision: Precision = Precision()) -> float:
    """Share of inter-layer data produced by layers whose whole footprint fits ``buffer``.

    A layer's footprint is its inputs plus its output for ``samples`` samples;
    the volume counted is the output each layer hands to the next.
    """
    total = fits = 0
    for layer in layers:
        sizes = layer_data_sizes(layer, samples, precision)
        total += sizes.output_bytes
        if sizes.input_bytes + sizes.output_bytes <= buffer:
            fits += sizes.output_bytes
    return fits / total if total else 0.0
