"""Register-level, cycle-by-cycle model of a weight-stationary systolic array.

This model is the reference definition of wave timing.  ``gemm.tile_cycles``
is a closed form fitted to it and the test suite checks the two agree.

Dataflow (k rows by n columns of PEs):

* B blocks (k x width) are loaded from the top.  Each column has a
  pass-through load pipe; column j is delayed by j cycles and rows are fed
  bottom-first, so every PE of column j latches its weight in the same cycle,
  ``s + j + k - 1`` for a load issued at cycle ``s``.  A load therefore occupies
  the issue port for k cycles.
* A rows stream in from the left.  Element ``A[r, i]`` of the wave started at
  ``t0`` enters PE(i, 0) at ``t0 + r + i`` and moves one column per cycle, so
  PE(i, j) multiplies it at ``t0 + r + i + j``.  Each element carries the
  register select bit of its wave.
* Partial sums move down one row per cycle.  The bottom row result enters an
  output register one cycle later and is added into the accumulator the cycle
  after that (``gemm.DRAIN_STAGES``, asserted below).

Controllers:

* Gapped: one weight register, and a sequencer that alternates load and
  stream phases without overlap: a load may issue only after the previous
  wave's last row has been issued.
* Double-buffered: two weight registers.  A fill into a register may issue once
  the load port is free and the register's previous wave can no longer be
  read by the time the fill latches.

Every weight register is tagged with the wave that owns it; a PE reading a
register owned by a different wave raises ``HazardError``.  Partial sums are
tagged with (wave, row) so any skew mistake is also caught.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gemm import DRAIN_STAGES, WaveMode


class HazardError(RuntimeError):
    pass


@dataclass
class PeGrid:
    rows: int
    cols: int
    weight_reg: np.ndarray = field(init=False, repr=False)   # (2, k, n)
    weight_tag: np.ndarray = field(init=False, repr=False)   # owning wave, -1 = empty
    select: np.ndarray = field(init=False, repr=False)       # select bit of the element in flight
    accum: np.ndarray = field(init=False, repr=False)        # partial sum leaving each PE
    cycle: int = 0

    def __post_init__(self):
        if not (1 <= self.rows <= 64 and 1 <= self.cols <= 64):
            raise ValueError("oracle grids are desk scale (at most 64 x 64)")
        shape = (self.rows, self.cols)
        self.weight_reg = np.zeros((2,) + shape)
        self.weight_tag = np.full((2,) + shape, -1)
        self.select = np.zeros(shape, dtype=int)
        self.accum = np.zeros(shape)


@dataclass
class OracleResult:
    cycles: int
    active: np.ndarray   # active PEs per cycle
    output: np.ndarray
    load_issue: list[int]
    stream_issue: list[int]


@dataclass(frozen=True)
class _Wave:
    """One k-deep slice of a tile: A rows in, a B block latched, C rows out."""

    a: np.ndarray        # (m, k), zero padded past K
    ok: np.ndarray       # (k,) True where the K index is real
    b: np.ndarray        # (k, n), zero padded
    width: int
    row0: int = 0        # where the tile sits in C
    col0: int = 0

    @property
    def m(self) -> int:
        return self.a.shape[0]


def _schedule(heights: list[int], k: int, mode: WaveMode) -> tuple[list[int], list[int]]:
    loads, streams = [], []
    for w in range(len(heights)):
        s = 0 if w == 0 else loads[-1] + k  # load port
        if mode is WaveMode.GAPPED:
            if w:
                s = max(s, streams[-1] + heights[w - 1])
        elif w >= 2:
            # register w % 2 was last read by wave w-2 at PE(k-1, j) in cycle
            # t0 + m - 1 + (k - 1) + j; the fill latches at s + j + k - 1
            s = max(s, streams[w - 2] + heights[w - 2] - 1)
        t0 = s + k
        if streams:
            t0 = max(t0, streams[-1] + heights[w - 1])  # stream port
        loads.append(s)
        streams.append(t0)
    return loads, streams


def _tile_waves(a: np.ndarray, b: np.ndarray, k: int, n: int, row0: int = 0, col0: int = 0) -> list[_Wave]:
    m, K = a.shape
    width = b.shape[1]
    waves = -(-K // k)
    a_pad = np.zeros((m, waves * k))
    a_pad[:, :K] = a
    b_pad = np.zeros((waves * k, n))
    b_pad[:K, :width] = b
    ok = np.zeros(waves * k, dtype=bool)
    ok[:K] = True
    return [_Wave(a_pad[:, w * k:(w + 1) * k], ok[w * k:(w + 1) * k], b_pad[w * k:(w + 1) * k],
                  width, row0, col0) for w in range(waves)]


def _check(a: np.ndarray, b: np.ndarray, grid: PeGrid) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or b.shape[0] != a.shape[1]:
        raise ValueError("inner dimensions differ")
    return a, b


def simulate_tile_cycle_accurate(a: np.ndarray, b: np.ndarray, grid: PeGrid,
                                 mode: WaveMode = WaveMode.DOUBLE_BUFFERED) -> OracleResult:
    """Run A (m x K) times B (K x width) through ``grid`` and count cycles."""
    a, b = _check(a, b, grid)
    if b.shape[1] > grid.cols:
        raise ValueError("B block is wider than the grid")
    return _run(_tile_waves(a, b, grid.rows, grid.cols), a.shape[0], b.shape[1], grid, mode)


def simulate_gemm_cycle_accurate(a: np.ndarray, b: np.ndarray, grid: PeGrid, tile_height: int,
                                 mode: WaveMode = WaveMode.DOUBLE_BUFFERED) -> OracleResult:
    """Whole GEMM: tiles of ``tile_height`` rows by ``grid.cols`` columns, row-major, back to back."""
    a, b = _check(a, b, grid)
    g_h, g_w = a.shape[0], b.shape[1]
    waves: list[_Wave] = []
    for r0 in range(0, g_h, tile_height):
        for c0 in range(0, g_w, grid.cols):
            waves += _tile_waves(a[r0:r0 + tile_height], b[:, c0:c0 + grid.cols],
                                 grid.rows, grid.cols, r0, c0)
    return _run(waves, g_h, g_w, grid, mode)


def _run(waves: list[_Wave], out_rows: int, out_cols: int, grid: PeGrid, mode: WaveMode) -> OracleResult:
    assert DRAIN_STAGES == 2, "the drain below is written as two explicit stages"
    k, n = grid.rows, grid.cols
    loads, streams = _schedule([w.m for w in waves], k, mode)
    regs = 1 if mode is WaveMode.GAPPED else 2

    shape = (k, n)
    a_val = np.zeros(shape); a_ok = np.zeros(shape, bool)
    a_wave = np.full(shape, -1); a_row = np.full(shape, -1)
    p_val = np.zeros(shape)                                    # partial sum arriving from above
    p_wave = np.full(shape, -1); p_row = np.full(shape, -1)
    ld_val = np.zeros(shape); ld_ok = np.zeros(shape, bool)
    ld_dest = np.full(shape, -1); ld_wave = np.full(shape, -1)
    output_stage: list = []
    accumulate_stage: list = []
    c = np.zeros((out_rows, out_cols))
    rows_idx = np.arange(k)[:, None].repeat(n, 1)
    cols_idx = np.arange(n)
    width_of = np.array([w.width for w in waves])
    active: list[int] = []
    last_accumulate = -1
    stream_end = max(t0 + w.m for t0, w in zip(streams, waves))
    t = 0
    while True:
        # A enters column 0: row i sees element r = t - t0 - i of the current wave
        a_val[:, 0] = 0; a_ok[:, 0] = False; a_wave[:, 0] = -1; a_row[:, 0] = -1
        for w, t0 in enumerate(streams):
            if t < t0 or t >= t0 + waves[w].m + k:
                continue
            r = t - t0 - np.arange(k)
            hit = (r >= 0) & (r < waves[w].m)
            ii = np.nonzero(hit)[0]
            a_val[ii, 0] = waves[w].a[r[ii], ii]
            a_ok[ii, 0] = waves[w].ok[ii]
            a_wave[ii, 0] = w
            a_row[ii, 0] = r[ii]
            grid.select[ii, 0] = w % regs
        # B enters the top of column j: destination row k - 1 - (t - s - j)
        ld_val[0] = 0; ld_ok[0] = False; ld_dest[0] = -1; ld_wave[0] = -1
        for w, s in enumerate(loads):
            if t < s or t >= s + n + k:
                continue
            dest = k - 1 - (t - s - cols_idx)
            hit = (dest >= 0) & (dest < k)
            jj = np.nonzero(hit)[0]
            ld_val[0, jj] = waves[w].b[dest[jj], jj]
            ld_ok[0, jj] = True
            ld_dest[0, jj] = dest[jj]
            ld_wave[0, jj] = w

        # row 0 starts a fresh partial sum whenever its wave stream reaches it
        p_val[0] = 0
        p_wave[0] = a_wave[0]
        p_row[0] = a_row[0]

        # multiply-accumulate
        sel = grid.select
        computing = a_wave >= 0
        if computing.any():
            tag = np.take_along_axis(grid.weight_tag, sel[None], 0)[0]
            if np.any(computing & (tag != a_wave)):
                i, j = np.argwhere(computing & (tag != a_wave))[0]
                raise HazardError(f"cycle {t}: PE({i},{j}) read a weight owned by wave {tag[i, j]}")
            if np.any(computing & ((p_wave != a_wave) | (p_row != a_row))):
                raise HazardError(f"cycle {t}: partial sum skew mismatch")
        weight = np.take_along_axis(grid.weight_reg, sel[None], 0)[0]
        live = computing & (cols_idx[None, :] < width_of[np.maximum(a_wave, 0)])
        real = a_ok & live
        active.append(int(real.sum()))
        out = p_val + np.where(real, a_val * weight, 0.0)
        grid.accum[:] = out

        # latch weights that reached their destination row (visible next cycle)
        latch = ld_ok & (ld_dest == rows_idx)
        if latch.any():
            reg = ld_wave % regs
            for i, j in np.argwhere(latch):
                r_ = reg[i, j]
                grid.weight_reg[r_, i, j] = ld_val[i, j]
                grid.weight_tag[r_, i, j] = ld_wave[i, j]

        # drain: bottom row -> output register -> accumulator
        if accumulate_stage:
            for r_, j_, v_ in accumulate_stage:
                c[r_, j_] += v_
            last_accumulate = t
        accumulate_stage = output_stage
        bottom = np.nonzero(live[k - 1])[0]
        output_stage = []
        for j in bottom:
            wv = waves[a_wave[k - 1, j]]
            output_stage.append((wv.row0 + a_row[k - 1, j], wv.col0 + j, out[k - 1, j]))

        # shift: A right, partial sums down, weight loads down
        a_val[:, 1:] = a_val[:, :-1].copy(); a_ok[:, 1:] = a_ok[:, :-1].copy()
        a_wave[:, 1:] = a_wave[:, :-1].copy(); a_row[:, 1:] = a_row[:, :-1].copy()
        grid.select[:, 1:] = grid.select[:, :-1].copy()
        p_val[1:] = out[:-1]
        p_wave[1:] = p_wave[:-1].copy()
        p_row[1:] = p_row[:-1].copy()
        ld_val[1:] = ld_val[:-1].copy(); ld_ok[1:] = (ld_ok & ~latch)[:-1]
        ld_dest[1:] = ld_dest[:-1].copy(); ld_wave[1:] = ld_wave[:-1].copy()
        t += 1
        if t > stream_end + k and not (output_stage or accumulate_stage or (a_wave >= 0).any()):
            break
    grid.cycle = t
    return OracleResult(cycles=last_accumulate + 1, active=np.array(active[: last_accumulate + 1]),
                        output=c, load_issue=loads, stream_issue=streams)
