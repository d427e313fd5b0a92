"""Configuration comparisons and sensitivity sweeps built on ``simulate``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .config import AcceleratorConfig, EnergyModel, MemoryConfig
from .ir.graph import NetworkGraph
from .mbs.scheduler import build_schedule
from .mbs.types import ALL_CONFIGS, ExecConfig
from .sim import SimReport, simulate

# per-core mini-batch used in the evaluation: 32 for the deep CNNs, 64 for AlexNet
DEFAULT_MINI_BATCH = {"alexnet": 64}


def default_mini_batch(net: NetworkGraph) -> int:
    return DEFAULT_MINI_BATCH.get(net.name, 32)


def run_config(net: NetworkGraph, config: ExecConfig | str, accel: AcceleratorConfig = AcceleratorConfig(),
               mem: MemoryConfig | None = None, mini_batch: int | None = None,
               energy: EnergyModel = EnergyModel(), unlimited_bandwidth: bool = False) -> SimReport:
    n = mini_batch or default_mini_batch(net)
    schedule = build_schedule(net, accel, n, config)
    return simulate(net, schedule, accel, mem, energy, unlimited_bandwidth)


@dataclass
class Comparison:
    network: str
    reports: dict[ExecConfig, SimReport] = field(default_factory=dict)

    def __getitem__(self, config: ExecConfig | str) -> SimReport:
        return self.reports[ExecConfig.parse(config) if isinstance(config, str) else config]

    def rows(self) -> list[dict]:
        """One row per config, with time and traffic relative to Baseline and ArchOpt."""
        base = self.reports.get(ExecConfig.BASELINE)
        arch = self.reports.get(ExecConfig.ARCH_OPT)
        out = []
        for cfg, r in self.reports.items():
            row = {
                "network": self.network, "config": cfg.value, "memory": r.memory,
                "mini_batch": r.mini_batch, "dram_bytes": r.dram_bytes, "wall_cycles": r.wall_cycles, "seconds": r.seconds,
                "energy_j": r.energy.total, "utilization": r.utilization,
            }
            for tag, ref in (("baseline", base), ("archopt", arch)):
                if ref is not None:
                    row[f"time_vs_{tag}"] = r.wall_cycles / ref.wall_cycles
                    row[f"traffic_vs_{tag}"] = r.dram_bytes / ref.dram_bytes if ref.dram_bytes else None
                    row[f"energy_vs_{tag}"] = r.energy.total / ref.energy.total
            out.append(row)
        return out


def compare_configs(net: NetworkGraph, accel: AcceleratorConfig = AcceleratorConfig(),
                    mem: MemoryConfig | None = None, mini_batch: int | None = None,
                    configs: Iterable[ExecConfig] = ALL_CONFIGS, energy: EnergyModel = EnergyModel(),
                    unlimited_bandwidth: bool = False) -> Comparison:
    cmp = Comparison(net.name)
    for cfg in configs:
        cmp.reports[cfg] = run_config(net, cfg, accel, mem, mini_batch, energy, unlimited_bandwidth)
    return cmp


@dataclass(frozen=True)
class SweepPoint:
    label: str             # buffer size in MiB, or memory name
    config: ExecConfig
    report: SimReport


def sweep_buffer(net: NetworkGraph, sizes: Sequence[int], accel: AcceleratorConfig = AcceleratorConfig(),
                 mem: MemoryConfig | None = None, mini_batch: int | None = None,
                 configs: Iterable[ExecConfig] = ALL_CONFIGS,
                 energy: EnergyModel = EnergyModel()) -> list[SweepPoint]:
    """Raises ``InfeasibleError`` if a size is below some layer's one-sample need."""
    points = []
    configs = tuple(configs)
    for size in sizes:
        acc = accel.with_buffer(size)
        for cfg in configs:
            points.append(SweepPoint(f"{size / 2**20:g}", cfg,
                                     run_config(net, cfg, acc, mem, mini_batch, energy)))
    return points


def sweep_memory(net: NetworkGraph, mems: Sequence[MemoryConfig], accel: AcceleratorConfig = AcceleratorConfig(),
                 mini_batch: int | None = None, configs: Iterable[ExecConfig] = ALL_CONFIGS,
                 energy: EnergyModel = EnergyModel()) -> list[SweepPoint]:
    configs = tuple(configs)
    return [SweepPoint(m.name, cfg, run_config(net, cfg, accel, m, mini_batch, energy))
            for m in mems for cfg in configs]


def normalize(points: Sequence[SweepPoint], ref_label: str, ref_config: ExecConfig | None = None) -> list[dict]:
    """Rows of time and traffic relative to one reference point.

    ``ref_config=None`` normalizes each config to itself at ``ref_label``
    (slowdown per config); otherwise every row uses that single config
    (as in the buffer-size figure, which is relative to IL at 5 MiB).
    """
    ref = {(p.label, p.config): p.report for p in points}
    rows = []
    for p in points:
        r0 = ref[(ref_label, ref_config or p.config)]
        rows.append({
            "point": p.label, "config": p.config.value,
            "dram_bytes": p.report.dram_bytes, "wall_cycles": p.report.wall_cycles,
            "traffic_rel": p.report.dram_bytes / r0.dram_bytes if r0.dram_bytes else None,
            "time_rel": p.report.wall_cycles / r0.wall_cycles,
        })
    return rows
