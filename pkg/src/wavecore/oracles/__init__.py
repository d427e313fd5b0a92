"""Independent reference engines the analytic models are tested against."""

from .liveset import LiveSet, replay_block, replay_group
from .systolic import (HazardError, OracleResult, PeGrid, simulate_gemm_cycle_accurate,
                       simulate_tile_cycle_accurate)
from .traffic_log import DramEvent, conservation_violations, forward_event_log, totals
