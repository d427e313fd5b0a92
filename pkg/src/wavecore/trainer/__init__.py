"""Float64 reference training used to check that serialization is exact."""

from .layers import BatchNorm, Conv2d, GroupNorm, Linear, Pool2d, ReLU, Residual
from .net import (StepResult, TinyNet, finite_difference_check, random_batch, random_tiny_net,
                  relative_delta, softmax_xent, train_step_full, train_step_serialized)
