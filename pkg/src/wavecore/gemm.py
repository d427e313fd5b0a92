"""im2col GEMM mapping, tiling and analytic wave timing for the systolic core."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .ir.accounting import Phase, gemm_dims
from .ir.types import LayerNode

KiB = 1024
# pipeline stages after the bottom PE row: output register, accumulator write.
# Fitted once against the cycle-accurate oracle and frozen.
DRAIN_STAGES = 2


class WaveMode(str, enum.Enum):
    GAPPED = "gapped"  # single weight register: every wave pays a k-cycle fill
    DOUBLE_BUFFERED = "double_buffered"


@dataclass(frozen=True)
class GemmShape:
    g_h: int
    g_w: int
    k: int

    def __post_init__(self):
        if min(self.g_h, self.g_w, self.k) < 1:
            raise ValueError(f"degenerate GEMM {self}")

    @property
    def macs(self) -> int:
        return self.g_h * self.g_w * self.k


@dataclass(frozen=True)
class ArrayConfig:
    pe_rows: int = 128
    pe_cols: int = 128
    a_half_buffer: int = 64 * KiB
    b_half_buffer: int = 32 * KiB
    accum_buffer: int = 128 * KiB
    feature_bytes: int = 2

    def __post_init__(self):
        if self.b_half_buffer != self.pe_rows * self.pe_cols * self.feature_bytes:
            raise ValueError("b_half_buffer must hold exactly one k x n block of B")
        if self.a_half_buffer < 2 * self.b_half_buffer:
            raise ValueError("a_half_buffer must be at least twice b_half_buffer")

    @property
    def max_tile_height(self) -> int:
        return self.a_half_buffer // (self.pe_rows * self.feature_bytes)

    @property
    def pes(self) -> int:
        return self.pe_rows * self.pe_cols


@dataclass(frozen=True)
class TilePlan:
    gemm: GemmShape
    tile_height: int
    tile_width: int
    row_tiles: int
    col_tiles: int
    waves_per_tile: int
    last_height: int
    last_width: int

    @property
    def tiles(self) -> int:
        return self.row_tiles * self.col_tiles

    def tile_shapes(self):
        """Yield (height, width, count) for the up-to-four distinct tile shapes."""
        full_r, full_c = self.row_tiles - 1, self.col_tiles - 1
        for h, nr in ((self.tile_height, full_r), (self.last_height, 1)):
            for w, nc in ((self.tile_width, full_c), (self.last_width, 1)):
                if nr and nc:
                    yield h, w, nr * nc


def im2col_dims(layer: LayerNode, samples: int, phase: Phase = Phase.FORWARD) -> GemmShape:
    return GemmShape(*gemm_dims(layer, samples, phase))


def tile(gemm: GemmShape, array: ArrayConfig = ArrayConfig(), tile_height: int | None = None) -> TilePlan:
    m = min(tile_height or array.max_tile_height, gemm.g_h)
    width = min(array.pe_cols, gemm.g_w)
    rows = math.ceil(gemm.g_h / m)
    cols = math.ceil(gemm.g_w / array.pe_cols)
    return TilePlan(
        gemm=gemm, tile_height=m, tile_width=width, row_tiles=rows, col_tiles=cols,
        waves_per_tile=math.ceil(gemm.k / array.pe_rows),
        last_height=gemm.g_h - (rows - 1) * m,
        last_width=gemm.g_w - (cols - 1) * array.pe_cols,
    )


def tile_cycles(height: int, width: int, waves: int, k: int, mode: WaveMode) -> int:
    """Cycles for one tile of C, from the first weight-load issue to the last accumulate.

    Constants match the cycle-accurate model in ``wavecore.oracles.systolic``:
    a weight fill takes k cycles, rows stream one per cycle, and the last row
    needs (k - 1) + (width - 1) skewed hops plus ``DRAIN_STAGES`` to land.
    """
    drain = (k - 1) + (width - 1) + DRAIN_STAGES
    if mode is WaveMode.GAPPED:
        return waves * (k + height) + drain
    # the next fill overlaps the current wave, but fills serialize on the load
    # port, so waves shorter than k rows cannot hide their successor's fill
    return k + (waves - 1) * max(height, k) + height + drain


def wave_runs(plan: TilePlan):
    """Tiles in row-major order as runs of identical waves: (height, width, count)."""
    runs: list[list[int]] = []

    def push(h, w, count):
        if runs and runs[-1][0] == h and runs[-1][1] == w:
            runs[-1][2] += count
        else:
            runs.append([h, w, count])

    waves = plan.waves_per_tile
    full_w, last_w, cols = plan.tile_width, plan.last_width, plan.col_tiles
    for h, reps in ((plan.tile_height, plan.row_tiles - 1), (plan.last_height, 1)):
        if reps == 0:
            continue
        if cols == 1 or full_w == last_w:
            push(h, last_w, reps * cols * waves)
        else:
            for _ in range(reps):
                push(h, full_w, (cols - 1) * waves)
                push(h, last_w, waves)
    return [tuple(r) for r in runs]


def stream_cycles(runs, k: int, mode: WaveMode) -> int:
    """Cycles to push a sequence of waves through the array back to back.

    Same issue rules as the oracle: a fill occupies the load port for k cycles
    and a wave's rows occupy the stream port for m cycles.  Gapped: a fill
    waits for the previous wave's last row.  Double-buffered: a fill waits for
    its register's previous owner (two waves back) to pass, and the first
    fill of the next tile overlaps the drain of the current one.  Long runs of
    identical waves are fast-forwarded at their steady period.
    """
    s_prev = t_prev = t_prev2 = m_prev = m_prev2 = None
    finish = 0
    for h, w, count in runs:
        done = 0
        while done < count:
            if s_prev is None:
                s = 0
            else:
                s = s_prev + k
                if mode is WaveMode.GAPPED:
                    s = max(s, t_prev + m_prev)
                elif t_prev2 is not None:
                    s = max(s, t_prev2 + m_prev2 - 1)
            t = s + k if t_prev is None else max(s + k, t_prev + m_prev)
            s_prev, t_prev2, m_prev2, t_prev, m_prev = s, t_prev, m_prev, t, h
            done += 1
            remaining = count - done
            if remaining > 2 and done >= 3:
                period = (h + k) if mode is WaveMode.GAPPED else max(h, k)
                jump = remaining - 2
                s_prev += jump * period
                t_prev += jump * period
                t_prev2 += jump * period
                done += jump
        finish = max(finish, t_prev + h + (k - 1) + (w - 1) + DRAIN_STAGES)
    return finish


def gemm_cycles(plan: TilePlan, array: ArrayConfig, mode: WaveMode) -> int:
    """Cycles for a whole GEMM, all tiles streamed as one wave sequence."""
    return stream_cycles(wave_runs(plan), array.pe_rows, mode)


def utilization(plan: TilePlan, array: ArrayConfig, mode: WaveMode) -> float:
    return plan.gemm.macs / (array.pes * gemm_cycles(plan, array, mode))
