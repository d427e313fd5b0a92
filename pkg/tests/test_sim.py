import pytest

from wavecore.config import AcceleratorConfig, EnergyModel, MemoryConfig
from wavecore.ir import build_graph, load_network
from wavecore.mbs import ExecConfig, build_schedule
from wavecore.sim import CapacityError, SimReport, energy_report, simulate

ACCEL = AcceleratorConfig()


def _run(name, cfg, mem="HBM2", unlimited=False, n=32):
    net = load_network(name)
    return simulate(net, build_schedule(net, ACCEL, n, cfg), ACCEL, MemoryConfig.preset(mem),
                    unlimited_bandwidth=unlimited)


def test_empty_network_report():
    net = build_graph({"name": "empty", "input": [3, 8, 8], "layers": []})
    r = simulate(net, build_schedule(net, ACCEL, 4, ExecConfig.MBS1))
    assert r.layers == [] and r.dram_bytes == 0 and r.wall_cycles == 0 and r.macs == 0


def test_static_energy_only():
    r = SimReport("x", ExecConfig.MBS1, 1, "HBM2", 2, 1e9, 16, wall_cycles=2e9)
    e = energy_report(r, EnergyModel())
    assert e.total == pytest.approx(EnergyModel().p_static * 2.0)


def test_moving_bytes_on_chip_saves_seven_eighths():
    em = EnergyModel()
    x = 10**6
    a = SimReport("x", ExecConfig.MBS1, 1, "HBM2", 2, 1e9, 16)
    a.ledger.features_in = x
    b = SimReport("x", ExecConfig.MBS1, 1, "HBM2", 2, 1e9, 16, gbuf_bytes=x)
    diff = energy_report(b, em).total - energy_report(a, em).total
    assert diff == pytest.approx(-x * 7 / 8 * em.e_dram)


def test_memory_bandwidth_ratios():
    ref = MemoryConfig.preset("HBM2x2").bandwidth
    assert MemoryConfig.preset("GDDR5").bandwidth / ref == pytest.approx(0.64)
    assert MemoryConfig.preset("LPDDR4").bandwidth / ref == pytest.approx(0.40, abs=0.005)


def test_report_totals_are_layer_sums():
    r = _run("inception_v3", ExecConfig.MBS2)
    assert r.dram_bytes == sum(l.dram_bytes for l in r.layers)
    assert r.wall_cycles == pytest.approx(sum(l.wall_cycles for l in r.layers))
    assert r.macs == sum(l.macs for l in r.layers)
    for l in r.layers:
        assert l.wall_cycles >= l.memory_cycles - 1e-6
        assert (l.utilization is None) == (l.macs == 0)


def test_unlimited_bandwidth_removes_memory_time():
    r = _run("resnet50", ExecConfig.BASELINE, unlimited=True)
    assert r.memory_cycles == 0
    assert r.wall_cycles < _run("resnet50", ExecConfig.BASELINE).wall_cycles


def test_archopt_faster_with_identical_traffic():
    for name in ("resnet50", "alexnet"):
        base, arch = _run(name, ExecConfig.BASELINE), _run(name, ExecConfig.ARCH_OPT)
        assert base.dram_bytes == arch.dram_bytes
        assert 0.09 <= 1 - arch.wall_cycles / base.wall_cycles <= 0.28


def test_capacity_check():
    tiny = MemoryConfig("tiny", 100e9, capacity=2**20)
    net = load_network("alexnet")
    with pytest.raises(CapacityError):
        simulate(net, build_schedule(net, ACCEL, 64, ExecConfig.BASELINE), ACCEL, tiny)


def test_schedule_must_cover_network():
    net = load_network("alexnet")
    other = build_schedule(load_network("resnet50"), ACCEL, 32, ExecConfig.MBS1)
    with pytest.raises(ValueError):
        simulate(net, other)


def test_energy_saving_band_resnet50():
    base, mbs2 = _run("resnet50", ExecConfig.BASELINE), _run("resnet50", ExecConfig.MBS2)
    saving = 1 - mbs2.energy.total / base.energy.total
    assert 0.20 <= saving <= 0.35


def test_summary_schema():
    s = _run("alexnet", ExecConfig.MBS1, n=64).summary()
    assert set(s) >= {"network", "config", "dram_bytes", "traffic", "wall_cycles", "seconds",
                      "utilization", "energy_j", "chip_energy_j"}
    assert set(s["energy_j"]) == {"mac", "dram", "gbuf", "lbuf", "static", "total"}
