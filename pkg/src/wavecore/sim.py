"""Analytic performance, traffic and energy model of one WaveCore training step."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

from .config import AcceleratorConfig, EnergyModel, MemoryConfig
from .gemm import ArrayConfig, GemmShape, WaveMode, gemm_cycles, tile
from .ir.accounting import Phase, gemm_dims
from .ir.graph import NetworkGraph
from .ir.types import LayerKind
from .mbs.traffic import TrafficLedger, TrafficModel
from .mbs.types import ExecConfig, MbsSchedule


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    mac: float = 0.0
    dram: float = 0.0
    gbuf: float = 0.0
    lbuf: float = 0.0
    static: float = 0.0

    @property
    def total(self) -> float:
        return self.mac + self.dram + self.gbuf + self.lbuf + self.static

    def as_dict(self) -> dict[str, float]:
        return {**dataclasses.asdict(self), "total": self.total}


@dataclass
class LayerReport:
    layer_id: str
    kind: str
    group: int
    ledger: TrafficLedger
    gbuf_bytes: int
    lbuf_bytes: int
    macs: int
    compute_cycles: int     # forward + backward
    memory_cycles: float
    wall_cycles: float
    utilization: float | None = None  # conv and FC layers only

    @property
    def dram_bytes(self) -> int:
        return self.ledger.total


@dataclass
class SimReport:
    """Totals are for one core; ``chip_*`` multiplies by the core count."""

    network: str
    config: ExecConfig
    mini_batch: int
    memory: str
    cores: int
    clock_hz: float
    pes: int
    layers: list[LayerReport] = field(default_factory=list)
    ledger: TrafficLedger = field(default_factory=TrafficLedger)
    gbuf_bytes: int = 0
    lbuf_bytes: int = 0
    macs: int = 0
    compute_cycles: int = 0
    memory_cycles: float = 0.0
    wall_cycles: float = 0.0
    gemm_macs: int = 0
    gemm_wall_cycles: float = 0.0
    energy: EnergyBreakdown = EnergyBreakdown()

    @property
    def dram_bytes(self) -> int:
        return self.ledger.total

    @property
    def seconds(self) -> float:
        return self.wall_cycles / self.clock_hz

    @property
    def utilization(self) -> float:
        """Useful MACs over PE-cycles spent in conv and FC layers."""
        if not self.gemm_wall_cycles:
            return 0.0
        return self.gemm_macs / (self.pes * self.gemm_wall_cycles)

    @property
    def chip_dram_bytes(self) -> int:
        return self.cores * self.dram_bytes

    @property
    def chip_energy(self) -> float:
        return self.cores * self.energy.total

    def summary(self) -> dict:
        return {
            "network": self.network,
            "config": self.config.value,
            "mini_batch_per_core": self.mini_batch,
            "memory": self.memory,
            "cores": self.cores,
            "dram_bytes": self.dram_bytes,
            "chip_dram_bytes": self.chip_dram_bytes,
            "traffic": self.ledger.as_dict(),
            "gbuf_bytes": self.gbuf_bytes,
            "lbuf_bytes": self.lbuf_bytes,
            "macs": self.macs,
            "compute_cycles": self.compute_cycles,
            "memory_cycles": self.memory_cycles,
            "wall_cycles": self.wall_cycles,
            "seconds": self.seconds,
            "utilization": self.utilization,
            "energy_j": self.energy.as_dict(),
            "chip_energy_j": self.chip_energy,
        }


@lru_cache(maxsize=200_000)
def _gemm_cost(g_h: int, g_w: int, k: int, array: ArrayConfig, mode: WaveMode) -> tuple[int, int]:
    """(cycles, local-buffer bytes) of one GEMM."""
    plan = tile(GemmShape(g_h, g_w, k), array)
    lbuf = sum(count * (h * k + k * w + h * w) for h, w, count in plan.tile_shapes())
    return gemm_cycles(plan, array, mode), lbuf * array.feature_bytes


def _gemm_phases(layer, group, mini_batch: int, array: ArrayConfig, mode: WaveMode):
    phases = [Phase.FORWARD, Phase.WEIGHT_GRAD]
    if layer.needs_input_grad:
        phases.insert(1, Phase.DATA_GRAD)
    out = {}
    for ph in phases:
        cycles = lbuf = macs = 0
        for samples, count in group.iteration_sizes(mini_batch):
            g_h, g_w, k = gemm_dims(layer, samples, ph)
            c, lb = _gemm_cost(g_h, g_w, k, array, mode)
            cycles += count * c
            lbuf += count * lb
            macs += count * g_h * g_w * k
        out[ph] = (cycles, lbuf, macs)
    return out


def working_set_bytes(net: NetworkGraph, mini_batch: int, accel: AcceleratorConfig) -> int:
    """DRAM bytes one core keeps alive: weights, their gradients and checkpoints."""
    p = accel.precision
    params = sum(l.weight_count + l.norm_param_count for l in net)
    ckpt = sum(l.output_elements for l in net if l.checkpoint) + net.input_shape.element_count
    peak = max((l.input_elements + l.output_elements for l in net), default=0)
    return 2 * params * p.weight_bytes + (ckpt + peak) * mini_batch * p.feature_bytes


def simulate(net: NetworkGraph, schedule: MbsSchedule, accel: AcceleratorConfig = AcceleratorConfig(),
             mem: MemoryConfig | None = None, energy: EnergyModel = EnergyModel(),
             unlimited_bandwidth: bool = False) -> SimReport:
    mem = mem or MemoryConfig.preset("HBM2")
    config, n = schedule.config, schedule.mini_batch
    array = accel.array
    report = SimReport(net.name, config, n, mem.name, accel.cores, accel.clock_hz, array.pes)
    if len(net) == 0:
        return report
    if set(schedule.group_of()) != set(net.layer_ids):
        raise ValueError("schedule does not cover the network's layers exactly")
    need = accel.cores * working_set_bytes(net, n, accel)
    if need > mem.capacity:
        raise CapacityError(f"{net.name}: working set {need / 2**30:.2f} GiB exceeds "
                            f"{mem.name} capacity {mem.capacity / 2**30:.2f} GiB")

    model = TrafficModel(net, config, n, accel.precision)
    group_of = schedule.group_of()
    group_idx = {id(g): i for i, g in enumerate(schedule.groups)}
    bytes_per_cycle = mem.per_core_bandwidth(accel.cores) / accel.clock_hz
    mode = config.wave_mode

    def mem_cycles(nbytes: float) -> float:
        return 0.0 if unlimited_bandwidth else nbytes / bytes_per_cycle

    for layer in net:
        t = model.layer_traffic(layer.id, group_of)
        group = group_of[layer.id]
        m_f, m_b = mem_cycles(t.forward.total), mem_cycles(t.backward.total)
        macs = lbuf = compute = 0
        if layer.kind.is_gemm:
            ph = _gemm_phases(layer, group, n, array, mode)
            macs = sum(v[2] for v in ph.values())
            lbuf = sum(v[1] for v in ph.values())
            c_f = ph[Phase.FORWARD][0]
            c_d = ph.get(Phase.DATA_GRAD, (0,))[0]
            c_w = ph[Phase.WEIGHT_GRAD][0]
            compute = c_f + c_d + c_w
            # the two backward GEMMs run back to back; each hides only its own traffic
            m_w = mem_cycles(t.wgrad_dram)
            wall = max(c_f, m_f) + max(c_d, m_b - m_w) + max(c_w, m_w)
            report.gemm_macs += macs
            report.gemm_wall_cycles += wall
        elif layer.kind is LayerKind.CONCAT and config.block_mode:
            wall = m_f + m_b  # in place: no data movement of its own
        else:
            # vector units stream every byte they touch through the buffer port
            s_f = (t.forward.total + t.gbuf_forward) / accel.vector_bytes_per_cycle
            s_b = (t.backward.total + t.gbuf_backward) / accel.vector_bytes_per_cycle
            compute = int(round(s_f + s_b))
            wall = max(s_f, m_f) + max(s_b, m_b)
        ledger = t.forward + t.backward
        report.layers.append(LayerReport(
            layer.id, layer.kind.value, group_idx[id(group)], ledger, t.gbuf, lbuf, macs,
            compute, m_f + m_b, wall,
            macs / (array.pes * wall) if layer.kind.is_gemm and wall else None))
        report.ledger += ledger
        report.gbuf_bytes += t.gbuf
        report.lbuf_bytes += lbuf
        report.macs += macs
        report.compute_cycles += compute
        report.memory_cycles += m_f + m_b
        report.wall_cycles += wall
    report.energy = energy_report(report, energy)
    return report


def energy_report(report: SimReport, energy: EnergyModel) -> EnergyBreakdown:
    return EnergyBreakdown(
        mac=(1 - energy.zero_operand_fraction) * report.macs * energy.e_mac,
        dram=report.dram_bytes * energy.e_dram,
        gbuf=report.gbuf_bytes * energy.e_gbuf,
        lbuf=report.lbuf_bytes * energy.e_lbuf,
        static=energy.p_static * report.seconds,
    )
