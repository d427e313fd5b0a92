"""Core value types of the CNN intermediate representation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping


class NetworkError(ValueError):
    """Base error for malformed network descriptions."""

    def __init__(self, message: str, layer_id: str | None = None):
        self.layer_id = layer_id
        if layer_id is not None:
            message = f"layer {layer_id!r}: {message}"
        super().__init__(message)


class SchemaError(NetworkError):
    pass


class ShapeMismatchError(NetworkError):
    pass


class CycleError(NetworkError):
    pass


class LayerKind(str, enum.Enum):
    CONV = "conv"
    FC = "fc"
    POOL = "pool"
    NORM = "norm"
    ACTIVATION = "relu"
    ADD = "add"
    CONCAT = "concat"

    @property
    def is_gemm(self) -> bool:
        return self in (LayerKind.CONV, LayerKind.FC)

    @property
    def is_vector(self) -> bool:
        return not self.is_gemm


class BlockKind(str, enum.Enum):
    RESIDUAL = "residual"
    INCEPTION = "inception"


@dataclass(frozen=True)
class TensorShape:
    n: int
    c: int
    h: int
    w: int

    def __post_init__(self):
        for name in ("n", "c", "h", "w"):
            if getattr(self, name) < 1:
                raise ValueError(f"TensorShape.{name} must be >= 1, got {getattr(self, name)}")

    @property
    def element_count(self) -> int:
        return self.n * self.c * self.h * self.w

    def nbytes(self, bits: int) -> int:
        # rounds up so 1-bit masks of odd sizes still occupy whole bytes
        return (self.element_count * bits + 7) // 8

    def with_samples(self, n: int) -> "TensorShape":
        return TensorShape(n, self.c, self.h, self.w)


@dataclass(frozen=True)
class ConvSpec:
    c_in: int
    c_out: int
    r: int = 1
    s: int = 1
    stride: int = 1
    pad_h: int = 0
    pad_w: int = 0
    has_bias: bool = False

    def __post_init__(self):
        if min(self.c_in, self.c_out, self.r, self.s, self.stride) < 1:
            raise ValueError(f"invalid ConvSpec {self}")
        if min(self.pad_h, self.pad_w) < 0:
            raise ValueError(f"negative padding in {self}")

    @property
    def weight_count(self) -> int:
        return self.c_in * self.c_out * self.r * self.s

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        ho = (h + 2 * self.pad_h - self.r) // self.stride + 1
        wo = (w + 2 * self.pad_w - self.s) // self.stride + 1
        return ho, wo


@dataclass(frozen=True)
class Precision:
    feature_bits: int = 16
    weight_bits: int = 16
    accum_bits: int = 32
    relu_grad_bits: int = 1

    def __post_init__(self):
        if self.accum_bits < self.feature_bits:
            raise ValueError("accum_bits must be >= feature_bits")
        if self.relu_grad_bits not in (1, self.feature_bits):
            raise ValueError("relu_grad_bits must be 1 or feature_bits")

    @property
    def feature_bytes(self) -> int:
        return self.feature_bits // 8

    @property
    def weight_bytes(self) -> int:
        return self.weight_bits // 8


@dataclass(frozen=True)
class LayerNode:
    """One layer. Shapes are per sample (n == 1)."""

    id: str
    kind: LayerKind
    params: Mapping[str, Any]
    input_ids: tuple[str, ...]
    output_shape: TensorShape
    input_shapes: tuple[TensorShape, ...] = ()
    # output must survive until backward (consumed by conv/fc/norm)
    checkpoint: bool = False
    # first layer consuming the network input produces no data gradient
    needs_input_grad: bool = True
    conv: ConvSpec | None = field(default=None, compare=False)

    @property
    def input_elements(self) -> int:
        return sum(s.element_count for s in self.input_shapes)

    @property
    def output_elements(self) -> int:
        return self.output_shape.element_count

    @property
    def weight_count(self) -> int:
        return self.conv.weight_count if self.conv is not None else 0

    @property
    def norm_param_count(self) -> int:
        # per-channel scale and shift
        return 2 * self.output_shape.c if self.kind is LayerKind.NORM else 0


@dataclass(frozen=True)
class BlockNode:
    id: str
    kind: BlockKind
    branches: tuple[tuple[str, ...], ...]
    split_input_id: str
    merge_id: str

    @property
    def merge_op(self) -> LayerKind:
        return LayerKind.ADD if self.kind is BlockKind.RESIDUAL else LayerKind.CONCAT

    @property
    def layer_ids(self) -> tuple[str, ...]:
        ids = [lid for br in self.branches for lid in br]
        ids.append(self.merge_id)
        return tuple(ids)
