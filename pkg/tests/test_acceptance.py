"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (repeated in the terminal summary)
and then asserts the same condition.
"""

import itertools
import time
from functools import lru_cache

import numpy as np

from toys import random_block_net, random_chain_net
from wavecore.config import AcceleratorConfig, MemoryConfig, MiB
from wavecore.experiments import compare_configs, sweep_buffer, sweep_memory
from wavecore.gemm import WaveMode, tile_cycles
from wavecore.ir import load_network
from wavecore.mbs import ExecConfig, build_schedule, exhaustive_best, schedule_dram_bytes, unit_footprint
from wavecore.oracles import PeGrid, replay_block, simulate_tile_cycle_accurate
from wavecore.trainer import (finite_difference_check, random_batch, random_tiny_net, relative_delta,
                              train_step_full, train_step_serialized)

DEEP = ("resnet50", "inception_v3", "inception_v4")
ALL_NETS = DEEP + ("alexnet",)
B, M1, M2, FS, IL, AO = (ExecConfig.BASELINE, ExecConfig.MBS1, ExecConfig.MBS2, ExecConfig.MBS_FS,
                         ExecConfig.IL, ExecConfig.ARCH_OPT)
_SUITE_START = time.perf_counter()


@lru_cache(maxsize=None)
def _net(name):
    return load_network(name)


@lru_cache(maxsize=None)
def _compare(name, unlimited=False):
    return compare_configs(_net(name), unlimited_bandwidth=unlimited)


def _pct(x):
    return f"{100 * x:.1f}%"


def test_c1_gradient_equivalence(verdict):
    t0 = time.perf_counter()
    worst, fd_worst = 0.0, 0.0
    for seed in range(5):
        net = random_tiny_net(seed, norm="gn", groups=2)
        x, y = random_batch(seed, batch=8)
        full = train_step_full(net, x, y)
        for sub in (1, 2, 3, 8):
            part = train_step_serialized(net, x, y, sub)
            worst = max(worst, *relative_delta(full.grads, part.grads).values())
        if seed < 2:
            fd_worst = max(fd_worst, *finite_difference_check(net, x, y, max_entries=8).values())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and fd_worst <= 1e-6 and elapsed < 30
    verdict("C1 gradient equivalence", ok,
            f"max serialized delta {worst:.2e} (<= 1e-9), finite-difference error {fd_worst:.2e} "
            f"(<= 1e-6), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_c2_footprint_oracle(verdict):
    t0 = time.perf_counter()
    mismatches = []
    for seed in range(100):
        net = random_block_net(seed, "residual" if seed % 2 == 0 else "inception")
        unit = next(u for u in net.units if u.is_block)
        for block_mode in (True, False):
            analytic = unit_footprint(net, unit, block_mode)
            replayed = replay_block(net, unit.block, block_mode).peak_bytes
            if analytic != replayed:
                mismatches.append((seed, block_mode, analytic, replayed))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 5
    verdict("C2 footprint oracle", ok,
            f"{len(mismatches)} mismatches over 100 blocks x 2 modes, {elapsed:.2f} s (< 5 s)")
    assert ok, mismatches[:5]


def _tile_cases():
    """Boundary classes of every parameter, each grid crossed with each."""
    for k, n in itertools.product((1, 2, 3, 5, 8, 16), repeat=2):
        for m in sorted({m for m in (1, 2, k - 1, k, k + 1, 2 * k + 1, 64) if 1 <= m <= 64}):
            for waves in (1, 2, 3, 8):
                yield k, n, m, waves, n


def test_c3_wave_timing_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    cases = list(_tile_cases())
    for _ in range(150):
        k, n = (int(v) for v in rng.integers(1, 17, 2))
        cases.append((k, n, int(rng.integers(1, 65)), int(rng.integers(1, 9)), int(rng.integers(1, n + 1))))
    bad = []
    for k, n, m, waves, width in cases:
        depth = waves * k - int(rng.integers(0, k))  # the last wave may be partial
        a = rng.integers(-3, 4, (m, depth)).astype(float)
        b = rng.integers(-3, 4, (depth, width)).astype(float)
        for mode in WaveMode:
            res = simulate_tile_cycle_accurate(a, b, PeGrid(k, n), mode)
            if (res.cycles != tile_cycles(m, width, waves, k, mode) or res.active.sum() != m * width * depth
                    or not np.array_equal(res.output, a @ b)):
                bad.append((k, n, m, waves, width, mode.value))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    verdict("C3 wave-timing oracle", ok,
            f"{len(bad)} mismatches over {2 * len(cases)} tiles (grids <= 16x16, m <= 64, waves <= 8), "
            f"{elapsed:.1f} s (< 60 s)")
    assert ok, bad[:5]


def test_c4_config_ordering(verdict):
    details, ok = [], True
    for name in DEEP:
        c = _compare(name)
        t = {cfg: c[cfg].dram_bytes for cfg in (M2, M1, FS, IL, B)}
        order = t[M2] < t[M1] < t[FS] < t[IL] < t[B]
        ok &= order
        detail = "traffic order " + ("ok" if order else "violated")
        if name != "resnet50":
            slower = c[FS].wall_cycles > c[IL].wall_cycles
            ok &= slower
            detail += f", MBS-FS/IL time {c[FS].wall_cycles / c[IL].wall_cycles:.3f} (> 1)"
        details.append(f"{name}: {detail}")
    verdict("C4 configuration ordering", ok, "; ".join(details))
    assert ok


def test_c5_quantitative_bands(verdict):
    checks = []

    def band(label, value, lo, hi):
        checks.append((label, value, lo <= value <= hi, f"[{_pct(lo)}, {_pct(hi)}]"))

    for name in ALL_NETS:
        c = _compare(name)
        base = c[B].dram_bytes
        if name in DEEP:
            lo, hi = (0.68, 0.85) if name == "resnet50" else (0.61, 0.81)
            band(f"{name} MBS2 traffic reduction", 1 - c[M2].dram_bytes / base, lo, hi)
            band(f"{name} MBS2 saving over MBS1", (c[M1].dram_bytes - c[M2].dram_bytes) / base, 0.02, 0.14)
        band(f"{name} ArchOpt speedup", c[B].wall_cycles / c[AO].wall_cycles - 1, 0.05, 0.35)
    alex = _compare("alexnet")
    ratio = alex[FS].ledger.weights / alex[B].ledger.weights
    checks.append(("alexnet MBS-FS/Baseline weight traffic", ratio, ratio >= 2, ">= 2x"))
    elapsed = time.perf_counter() - _SUITE_START   # includes the simulations shared with C4
    ok = all(c[2] for c in checks) and elapsed < 120
    failed = [f"{label} {_pct(v) if 'x' not in want else f'{v:.2f}x'} not in {want}"
              for label, v, good, want in checks if not good]
    verdict("C5 quantitative bands", ok,
            f"{len(checks) - len(failed)}/{len(checks)} in band, suite at {elapsed:.1f} s (< 120 s)"
            + (f"; out of band: {'; '.join(failed)}" if failed else ""))
    for label, v, good, want in checks:
        print(f"    {'ok ' if good else 'BAD'} {label}: {v:.4f} want {want}")
    assert ok


def test_c6_buffer_sensitivity(verdict):
    net = _net("resnet50")
    sizes = [5 * MiB, 10 * MiB, 20 * MiB, 40 * MiB]
    points = sweep_buffer(net, sizes, configs=(IL, M1, M2))
    traffic = {(p.label, p.config): p.report.dram_bytes for p in points}
    ref = traffic[("5", IL)]   # the sweep is plotted relative to IL with a 5 MiB buffer
    spreads = {}
    for cfg in (M1, M2):
        vals = [traffic[(lab, cfg)] for lab in ("5", "10", "20", "40")]
        spreads[cfg] = ((max(vals) - min(vals)) / ref, max(vals) / min(vals) - 1)
    beats_il = traffic[("5", M2)] < traffic[("40", IL)]
    ok = all(s[0] < 0.10 for s in spreads.values()) and beats_il
    verdict("C6 buffer sensitivity", ok,
            "; ".join(f"{cfg.value} spread {_pct(s[0])} of IL@5MiB (< 10%), {_pct(s[1])} of its own minimum"
                      for cfg, s in spreads.items())
            + f"; MBS2@5MiB/IL@40MiB traffic {traffic[('5', M2)] / traffic[('40', IL)]:.3f} (< 1)")
    assert ok


def test_c7_bandwidth_sensitivity(verdict):
    mems = [MemoryConfig.preset(m) for m in ("HBM2x2", "GDDR5", "LPDDR4")]
    details, ok = [], True
    for name in ALL_NETS:
        points = sweep_memory(_net(name), mems, configs=(B, M2))
        t = {(p.label, p.config): p.report.wall_cycles for p in points}
        for mem, limit in (("GDDR5", 0.08), ("LPDDR4", 0.20)):
            up_m2 = t[(mem, M2)] / t[("HBM2x2", M2)] - 1
            up_b = t[(mem, B)] / t[("HBM2x2", B)] - 1
            good = up_m2 <= limit and up_b > up_m2
            ok &= good
            details.append(f"{name} {mem} MBS2 +{_pct(up_m2)} (<= {_pct(limit)}) Baseline +{_pct(up_b)}")
    verdict("C7 bandwidth sensitivity", ok, "; ".join(details))
    assert ok


def _mean_layer_util(report):
    vals = [l.utilization for l in report.layers if l.utilization is not None]
    return float(np.mean(vals))


def test_c8_utilization(verdict):
    per_net = {cfg: [] for cfg in (B, AO, FS, M1, M2)}
    weighted = {cfg: [] for cfg in per_net}
    for name in ALL_NETS:
        c = _compare(name, unlimited=True)
        for cfg in per_net:
            per_net[cfg].append(_mean_layer_util(c[cfg]))
            weighted[cfg].append(c[cfg].utilization)
    u = {cfg: float(np.mean(v)) for cfg, v in per_net.items()}
    bands = {B: (0.45, 0.62), AO: (0.73, 0.90), FS: (0.58, 0.75)}
    ok = all(lo <= u[cfg] <= hi for cfg, (lo, hi) in bands.items())
    ok &= all(abs(u[cfg] - u[AO]) <= 0.05 for cfg in (M1, M2))
    verdict("C8 utilization", ok,
            ", ".join(f"{cfg.value} {_pct(u[cfg])}" for cfg in per_net)
            + " (mean over conv/FC layers, averaged over networks; MAC-weighted: "
            + ", ".join(f"{cfg.value} {_pct(float(np.mean(v)))}" for cfg, v in weighted.items()) + ")")
    assert ok


def test_c9_grouping_optimality(verdict):
    gaps = []
    for seed in range(40):
        net = random_chain_net(seed, max_layers=10)
        rng = np.random.default_rng(seed)
        largest = max(unit_footprint(net, u, True) for u in net.units)
        for cfg in (M1, M2):
            accel = AcceleratorConfig(global_buffer=int(largest * rng.uniform(1, 12)), buffer_reserve=0)
            best, _ = exhaustive_best(net, accel, 16, cfg)
            greedy = schedule_dram_bytes(net, build_schedule(net, accel, 16, cfg), accel.precision)
            gaps.append(greedy / best - 1)
    worst = max(gaps)
    ok = worst <= 0.02 and min(gaps) >= -1e-12
    verdict("C9 grouping optimality", ok,
            f"worst greedy/exhaustive excess {_pct(worst)} (<= 2%), mean {100 * np.mean(gaps):.3f}% "
            f"over {len(gaps)} schedules")
    assert ok
