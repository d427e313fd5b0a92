"""Mini-batch serialization: footprints, grouping and traffic accounting."""

from .footprint import (BlockFootprint, FootprintMode, block_footprint, inception_block_footprint,
                        layer_footprint, max_subbatch, residual_block_footprint, unit_footprint)
from .scheduler import build_schedule, exhaustive_best, iterations_for, schedule_dram_bytes
from .traffic import CATEGORIES, LayerTraffic, TrafficLedger, TrafficModel
from .types import ALL_CONFIGS, ExecConfig, InfeasibleError, LayerGroup, MbsSchedule
