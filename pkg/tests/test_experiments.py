import pytest

from wavecore.config import AcceleratorConfig, MemoryConfig, MiB
from wavecore.experiments import compare_configs, default_mini_batch, normalize, sweep_buffer, sweep_memory
from wavecore.ir import load_network
from wavecore.mbs import ALL_CONFIGS, ExecConfig, InfeasibleError

IL, M1, M2, B = ExecConfig.IL, ExecConfig.MBS1, ExecConfig.MBS2, ExecConfig.BASELINE


@pytest.fixture(scope="module")
def resnet():
    return load_network("resnet50")


@pytest.fixture(scope="module")
def buffer_sweep(resnet):
    return sweep_buffer(resnet, [5 * MiB, 40 * MiB], configs=(B, IL, M1, M2))


def test_default_mini_batch():
    assert default_mini_batch(load_network("alexnet")) == 64
    assert default_mini_batch(load_network("inception_v3")) == 32


def test_compare_rows():
    c = compare_configs(load_network("alexnet"))
    rows = c.rows()
    assert [r["config"] for r in rows] == [cfg.value for cfg in ALL_CONFIGS]
    base = rows[0]
    assert base["time_vs_baseline"] == 1.0 and base["traffic_vs_baseline"] == 1.0
    arch = next(r for r in rows if r["config"] == ExecConfig.ARCH_OPT.value)
    assert arch["time_vs_archopt"] == 1.0
    assert c["MBS2"] is c[M2]


def test_normalize_to_single_reference(buffer_sweep):
    rows = normalize(buffer_sweep, "5", IL)
    ref = next(r for r in rows if r["point"] == "5" and r["config"] == "IL")
    assert ref["traffic_rel"] == 1.0 and ref["time_rel"] == 1.0
    own = normalize(buffer_sweep, "5")
    assert all(r["time_rel"] == 1.0 for r in own if r["point"] == "5")


def test_larger_buffer_never_hurts_il(buffer_sweep):
    t = {(p.label, p.config): p.report.dram_bytes for p in buffer_sweep}
    assert t[("40", IL)] <= t[("5", IL)]
    assert t[("40", B)] == t[("5", B)]


def test_il_at_40mib_loses_to_mbs_at_5mib(buffer_sweep):
    t = {(p.label, p.config): p.report.wall_cycles for p in buffer_sweep}
    assert t[("5", M1)] < t[("40", IL)] and t[("5", M2)] < t[("40", IL)]


def test_il_40mib_traffic_saving_reference(buffer_sweep):
    # reference value: IL with 40 MiB saves about 47% of Baseline traffic
    t = {(p.label, p.config): p.report.dram_bytes for p in buffer_sweep}
    assert 1 - t[("40", IL)] / t[("40", B)] == pytest.approx(0.47, abs=0.10)


def test_sweep_rejects_tiny_buffer(resnet):
    with pytest.raises(InfeasibleError):
        sweep_buffer(resnet, [64 * 1024 + 4096], configs=(M1,))


def test_memory_sweep_labels():
    pts = sweep_memory(load_network("alexnet"), [MemoryConfig.preset("HBM2"), MemoryConfig.preset("LPDDR4")],
                       configs=(M2,))
    assert [p.label for p in pts] == ["HBM2", "LPDDR4"]
    assert pts[1].report.wall_cycles >= pts[0].report.wall_cycles


def test_mini_batch_override():
    c = compare_configs(load_network("alexnet"), AcceleratorConfig(), mini_batch=16, configs=(M1,))
    assert c[M1].mini_batch == 16
