"""Sub-batch sizing and layer grouping for each execution configuration."""

from __future__ import annotations

import math
from typing import Sequence

from ..ir.graph import NetworkGraph, Unit
from ..ir.types import Precision
from .footprint import layer_footprint, max_subbatch, unit_footprint
from .traffic import TrafficModel
from .types import ExecConfig, InfeasibleError, LayerGroup, MbsSchedule


def iterations_for(mini_batch: int, sub_batch: int) -> int:
    return math.ceil(mini_batch / sub_batch)


def _group(units: Sequence[Unit], sub: int, mini_batch: int, budget: int, fp: int,
           resident: bool = True) -> LayerGroup:
    iters = iterations_for(mini_batch, sub)
    # spread samples evenly: the same iteration count with the smallest sub-batch
    sub = math.ceil(mini_batch / iters)
    return LayerGroup(
        member_ids=tuple(u.id for u in units),
        layer_ids=tuple(lid for u in units for lid in u.layer_ids),
        sub_batch=sub, iterations=iters, buffer_budget_bytes=budget,
        resident=resident, footprint_bytes=fp)


class _Planner:
    def __init__(self, net: NetworkGraph, config: ExecConfig, mini_batch: int, budget: int,
                 precision: Precision, inplace: bool):
        if mini_batch < 1:
            raise ValueError("mini_batch must be positive")
        self.net = net
        self.config = config
        self.n = mini_batch
        self.budget = budget
        self.precision = precision
        self.model = TrafficModel(net, config, mini_batch, precision)
        self.units = list(net.units)
        self.fp = {u.id: unit_footprint(net, u, config.block_mode, precision, inplace) for u in self.units}

    def unit_sub(self, unit: Unit) -> int:
        s = max_subbatch(self.fp[unit.id], self.budget)
        if s == 0:
            raise InfeasibleError(
                f"needs {self.fp[unit.id]} B per sample but the buffer budget is {self.budget} B", unit.id)
        return min(s, self.n)

    def make(self, runs: Sequence[Sequence[Unit]]) -> list[LayerGroup]:
        return [_group(r, min(self.unit_sub(u) for u in r), self.n, self.budget,
                       max(self.fp[u.id] for u in r)) for r in runs]

    def cost(self, groups: Sequence[LayerGroup], lookup: dict) -> int:
        return sum(self.model.dram_of(g.layer_ids, lookup) for g in groups)

    def _delta(self, groups, lookup, i: int, new_runs: list[list[Unit]]):
        """Traffic change from replacing groups i, i+1 by ``new_runs``.

        Only edges touching the two groups change, so the comparison covers
        them and their immediate neighbours.
        """
        new = self.make(new_runs)
        lo, hi = max(i - 1, 0), min(i + 3, len(groups))
        trial = dict(lookup)
        for g in new:
            trial.update({lid: g for lid in g.layer_ids})
        after = self.cost(groups[lo:i] + new + groups[i + 2:hi], trial)
        return after - self.cost(groups[lo:hi], lookup), new, trial

    def greedy(self, groups: list[LayerGroup], runs: list[list[Unit]]) -> list[LayerGroup]:
        """Left-to-right local moves, repeated until none lowers traffic.

        At each boundary the two neighbouring groups are merged, or their
        units are re-split at another cut, whichever lowers modeled DRAM
        traffic the most.  Moving the cut lets it settle where the inter-layer
        tensor is small instead of where the iteration count happens to change.
        """
        lookup = {lid: g for g in groups for lid in g.layer_ids}
        changed = True
        while changed:
            changed = False
            i = 0
            while i + 1 < len(groups):
                both = runs[i] + runs[i + 1]
                cut = len(runs[i])
                moves = [[both]] + [[both[:j], both[j:]] for j in range(1, len(both)) if j != cut]
                best = None
                for move in moves:
                    delta, new, trial = self._delta(groups, lookup, i, move)
                    if delta < 0 and (best is None or delta < best[0]):
                        best = (delta, move, new, trial)
                if best is None:
                    i += 1
                    continue
                _, move, new, lookup = best
                groups[i:i + 2] = new
                runs[i:i + 2] = move
                changed = True
        return groups


def initial_runs(units: Sequence[Unit], iters: dict[str, int]) -> list[list[Unit]]:
    runs: list[list[Unit]] = []
    for u in units:
        if runs and iters[runs[-1][-1].id] == iters[u.id]:
            runs[-1].append(u)
        else:
            runs.append([u])
    return runs


def build_schedule(net: NetworkGraph, accel, mini_batch: int, config: ExecConfig | str) -> MbsSchedule:
    """Group the network's layers and size sub-batches for ``config``.

    ``accel`` needs ``buffer_budget`` (bytes) and ``precision``, and may set
    ``inplace_elementwise``.
    """
    config = ExecConfig.parse(config) if isinstance(config, str) else config
    budget, precision = accel.buffer_budget, accel.precision
    inplace = getattr(accel, "inplace_elementwise", False)
    if len(net) == 0:
        return MbsSchedule(net.name, config, mini_batch, ())
    plan = _Planner(net, config, mini_batch, budget, precision, inplace)

    if config in (ExecConfig.BASELINE, ExecConfig.ARCH_OPT):
        groups = [
            LayerGroup((l.id,), (l.id,), mini_batch, 1, budget, resident=False,
                       footprint_bytes=layer_footprint(l, precision, net, inplace))
            for l in net]
    elif config is ExecConfig.IL:
        groups = _inter_layer_groups(net, mini_batch, budget, precision, inplace)
    elif config is ExecConfig.MBS_FS:
        groups = plan.make([plan.units])
    else:
        iters = {u.id: iterations_for(mini_batch, plan.unit_sub(u)) for u in plan.units}
        runs = initial_runs(plan.units, iters)
        groups = plan.greedy(plan.make(runs), runs)
    return MbsSchedule(net.name, config, mini_batch, tuple(groups))


def _inter_layer_groups(net: NetworkGraph, mini_batch: int, budget: int, precision: Precision,
                        inplace: bool) -> list[LayerGroup]:
    """Runs of layers whose whole-mini-batch footprint fits are kept on chip."""
    groups: list[LayerGroup] = []
    run: list = []

    def flush():
        if run:
            groups.append(LayerGroup(tuple(l.id for l in run), tuple(l.id for l in run), mini_batch, 1,
                                     budget, resident=True,
                                     footprint_bytes=max(layer_footprint(l, precision, net, inplace) for l in run)))
            run.clear()

    for layer in net:
        fp = layer_footprint(layer, precision, net, inplace)
        if fp * mini_batch <= budget:
            run.append(layer)
        else:
            flush()
            groups.append(LayerGroup((layer.id,), (layer.id,), mini_batch, 1, budget,
                                     resident=False, footprint_bytes=fp))
    flush()
    return groups


def schedule_dram_bytes(net: NetworkGraph, schedule: MbsSchedule, precision: Precision = Precision()) -> int:
    model = TrafficModel(net, schedule.config, schedule.mini_batch, precision)
    return model.dram_of(net.layer_ids, schedule.group_of())


def exhaustive_best(net: NetworkGraph, accel, mini_batch: int, config: ExecConfig = ExecConfig.MBS1):
    """Minimum-traffic contiguous grouping by brute force (toy networks only)."""
    plan = _Planner(net, config, mini_batch, accel.buffer_budget, accel.precision,
                    getattr(accel, "inplace_elementwise", False))
    units = plan.units
    if len(units) > 14:
        raise ValueError("exhaustive search is limited to 14 units")
    best = None
    for mask in range(1 << (len(units) - 1)):
        runs, cur = [], [units[0]]
        for i, u in enumerate(units[1:]):
            if mask >> i & 1:
                runs.append(cur)
                cur = [u]
            else:
                cur.append(u)
        runs.append(cur)
        groups = plan.make(runs)
        lookup = {lid: g for g in groups for lid in g.layer_ids}
        cost = plan.cost(groups, lookup)
        if best is None or cost < best[0]:
            best = (cost, MbsSchedule(net.name, config, mini_batch, tuple(groups)))
    return best
