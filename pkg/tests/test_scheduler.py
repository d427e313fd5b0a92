import pytest

from wavecore.config import AcceleratorConfig, MiB
from wavecore.ir import build_graph, load_network
from wavecore.ir.zoo import NetBuilder
from wavecore.mbs import (ExecConfig, InfeasibleError, LayerGroup, MbsSchedule, build_schedule,
                          exhaustive_best, iterations_for, schedule_dram_bytes)
from wavecore.mbs.footprint import unit_footprint
from wavecore.mbs.scheduler import _Planner, initial_runs

ACCEL = AcceleratorConfig()


def test_iteration_count():
    assert iterations_for(32, 5) == 7


def test_uneven_last_iteration():
    g = LayerGroup(("a",), ("a",), 5, 7, 100)
    assert g.iteration_sizes(32) == [(5, 6), (2, 1)]
    assert LayerGroup(("a",), ("a",), 4, 8, 100).iteration_sizes(32) == [(4, 8)]
    with pytest.raises(ValueError):
        LayerGroup(("a",), ("a",), 0, 1, 100)


@pytest.mark.parametrize("name", ["resnet50", "inception_v3"])
@pytest.mark.parametrize("cfg", list(ExecConfig))
def test_partition_and_feasibility(name, cfg):
    net = load_network(name)
    s = build_schedule(net, ACCEL, 32, cfg)
    ids = [lid for g in s.groups for lid in g.layer_ids]
    assert ids == list(net.layer_ids)
    for g in s.groups:
        assert 1 <= g.sub_batch <= 32 and g.iterations == iterations_for(32, g.sub_batch)
        if cfg.is_mbs:
            assert g.sub_batch * g.footprint_bytes <= ACCEL.buffer_budget
    if cfg.is_mbs:
        # blocks never split across groups
        for g in s.groups:
            for u in net.units:
                if u.id in g.member_ids:
                    assert set(u.layer_ids) <= set(g.layer_ids)


def test_iterations_non_increasing_along_depth():
    s = build_schedule(load_network("resnet50"), ACCEL, 32, ExecConfig.MBS1)
    iters = [g.iterations for g in s.groups]
    assert iters[0] > iters[-1]
    assert iters == sorted(iters, reverse=True)


def test_block_mode_needs_more_iterations():
    net = load_network("resnet50")
    assert (build_schedule(net, ACCEL, 32, ExecConfig.MBS2).total_iterations
            >= build_schedule(net, ACCEL, 32, ExecConfig.MBS1).total_iterations)


def test_fixed_configs():
    net = load_network("resnet50")
    fs = build_schedule(net, ACCEL, 32, "MBS-FS")
    assert len(fs.groups) == 1
    plan = _Planner(net, ExecConfig.MBS_FS, 32, ACCEL.buffer_budget, ACCEL.precision, False)
    assert fs.groups[0].sub_batch <= min(plan.unit_sub(u) for u in net.units)
    base = build_schedule(net, ACCEL, 32, "baseline")
    assert len(base.groups) == len(net) and not any(g.resident for g in base.groups)
    il = build_schedule(net, ACCEL, 32, ExecConfig.IL)
    assert all(g.sub_batch == 32 for g in il.groups)


def test_greedy_never_worse_than_initial_groups():
    net = load_network("resnet50")
    for cfg in (ExecConfig.MBS1, ExecConfig.MBS2):
        plan = _Planner(net, cfg, 32, ACCEL.buffer_budget, ACCEL.precision, False)
        iters = {u.id: iterations_for(32, plan.unit_sub(u)) for u in plan.units}
        start = MbsSchedule(net.name, cfg, 32, tuple(plan.make(initial_runs(plan.units, iters))))
        assert (schedule_dram_bytes(net, build_schedule(net, ACCEL, 32, cfg))
                <= schedule_dram_bytes(net, start))


def test_infeasible_buffer():
    net = load_network("resnet50")
    with pytest.raises(InfeasibleError) as err:
        build_schedule(net, ACCEL.with_buffer(1 * MiB), 32, ExecConfig.MBS2)
    assert err.value.unit_id is not None


def test_schedule_round_trip():
    s = build_schedule(load_network("inception_v3"), ACCEL, 32, ExecConfig.MBS2)
    assert MbsSchedule.from_json(s.to_json()) == s


def test_config_names():
    assert ExecConfig.parse("mbs_fs") is ExecConfig.MBS_FS
    assert ExecConfig.parse("ARCH_OPT") is ExecConfig.ARCH_OPT
    with pytest.raises(ValueError):
        ExecConfig.parse("MBS3")


def test_empty_network():
    net = build_graph({"name": "empty", "input": [3, 8, 8], "layers": []})
    assert build_schedule(net, ACCEL, 8, ExecConfig.MBS1).groups == ()


def test_moving_the_cut_to_a_small_tensor():
    # two heavy early layers, a pool shrinking the tensor, then light layers:
    # the cheapest cut sits right after the pool
    b = NetBuilder("cut", (4, 32, 32))
    b.add("c0", "conv", "input", c_out=16, kernel=3, pad=1)
    b.add("c1", "conv", "c0", c_out=16, kernel=3, pad=1)
    b.add("p", "pool", "c1", mode="max", kernel=4, stride=4)
    b.add("c2", "conv", "p", c_out=8, kernel=1)
    b.add("c3", "conv", "c2", c_out=8, kernel=1)
    net = build_graph(b.to_dict())
    largest = max(unit_footprint(net, u, False) for u in net.units)
    accel = AcceleratorConfig(global_buffer=4 * largest, buffer_reserve=0)
    s = build_schedule(net, accel, 16, ExecConfig.MBS1)
    best, _ = exhaustive_best(net, accel, 16)
    assert schedule_dram_bytes(net, s) == best
