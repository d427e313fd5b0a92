from .accounting import LayerSizes, Phase, conv_macs, gemm_dims, layer_data_sizes, reusable_fraction
from .graph import INPUT_ID, NetworkGraph, Unit, build_graph
from .parser import BUNDLED, load_network, parse_network
from .types import (BlockKind, BlockNode, ConvSpec, CycleError, LayerKind, LayerNode,
                    NetworkError, Precision, SchemaError, ShapeMismatchError, TensorShape)
