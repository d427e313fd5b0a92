"""Command-line entry point: ``wavecore <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, MiB, load_accelerator, load_energy, load_memory
from .experiments import (compare_configs, default_mini_batch, normalize, sweep_buffer,
                          sweep_memory)
from .ir import BUNDLED, NetworkError, load_network
from .mbs.scheduler import build_schedule
from .mbs.types import ALL_CONFIGS, ExecConfig, InfeasibleError
from .report import (LAYER_COLUMNS, SUMMARY_COLUMNS, SWEEP_COLUMNS, format_table, layer_rows,
                     report_payload, write_csv, write_json)
from .sim import CapacityError, simulate


def _configs(names: list[str] | None) -> tuple[ExecConfig, ...]:
    return ALL_CONFIGS if not names else tuple(ExecConfig.parse(n) for n in names)


def _common(p: argparse.ArgumentParser, many_configs: bool = True):
    p.add_argument("--network", "-n", required=True,
                   help=f"bundled id ({', '.join(BUNDLED)}) or path to a network YAML file")
    p.add_argument("--accel", help="accelerator YAML file (default: built-in WaveCore core)")
    p.add_argument("--energy", help="energy coefficient YAML file (defaults are placeholders)")
    p.add_argument("--mini-batch", "-b", type=int, help="samples per core (default 32, AlexNet 64)")
    if many_configs:
        p.add_argument("--config", "-c", nargs="+", metavar="NAME",
                       help="subset of: " + ", ".join(c.value for c in ALL_CONFIGS))
    else:
        p.add_argument("--config", "-c", default="MBS2", help="execution configuration (default MBS2)")
    p.add_argument("--out", "-o", type=Path, help="directory for JSON and CSV outputs")


def _mem_arg(p: argparse.ArgumentParser):
    p.add_argument("--mem", "-m", default="HBM2", help="memory preset (HBM2, HBM2x2, GDDR5, LPDDR4) or YAML file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavecore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one configuration, per-layer detail")
    _common(p, many_configs=False)
    _mem_arg(p)
    p.add_argument("--unlimited-bandwidth", action="store_true", help="zero memory time (utilization study)")

    p = sub.add_parser("compare", help="all configurations side by side")
    _common(p)
    _mem_arg(p)
    p.add_argument("--unlimited-bandwidth", action="store_true")

    p = sub.add_parser("sweep-buffer", help="global buffer size sensitivity")
    _common(p)
    _mem_arg(p)
    p.add_argument("--sizes-mib", type=float, nargs="+", default=[5, 10, 20, 40])

    p = sub.add_parser("sweep-memory", help="DRAM technology sensitivity")
    _common(p)
    p.add_argument("--mems", nargs="+", default=["HBM2x2", "HBM2", "GDDR5", "LPDDR4"],
                   help="presets or YAML files; the first is the reference")

    p = sub.add_parser("verify-equivalence", help="serialized vs full mini-batch gradients")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--sub-batches", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--groups", type=int, default=2, help="GN groups")
    p.add_argument("--norm", choices=["gn", "bn"], default="gn")
    p.add_argument("--tolerance", type=float, default=1e-9)
    return parser


def _setup(args):
    net = load_network(args.network)
    accel = load_accelerator(args.accel)
    energy = load_energy(args.energy)
    n = args.mini_batch or default_mini_batch(net)
    return net, accel, energy, n


def cmd_simulate(args) -> int:
    net, accel, energy, n = _setup(args)
    mem = load_memory(args.mem)
    schedule = build_schedule(net, accel, n, args.config)
    report = simulate(net, schedule, accel, mem, energy, args.unlimited_bandwidth)
    s = report.summary()
    print(f"{net.name} {report.config.value} on {mem.name}, {n} samples/core, "
          f"{len(schedule.groups)} groups, {schedule.total_iterations} iterations")
    for key in ("dram_bytes", "gbuf_bytes", "wall_cycles", "seconds", "utilization", "chip_energy_j"):
        print(f"  {key:14s} {s[key]:.6g}")
    print("  traffic by category (bytes):")
    for cat, v in s["traffic"].items():
        print(f"    {cat:22s} {v}")
    if args.out:
        stem = f"{net.name}_{report.config.value}"
        write_json(args.out / f"{stem}.json", report_payload(report, schedule))
        write_csv(args.out / f"{stem}_layers.csv", layer_rows(report), LAYER_COLUMNS)
        print(f"wrote {args.out}/{stem}.json and {stem}_layers.csv")
    return 0


def cmd_compare(args) -> int:
    net, accel, energy, n = _setup(args)
    mem = load_memory(args.mem)
    cmp = compare_configs(net, accel, mem, n, _configs(args.config), energy, args.unlimited_bandwidth)
    rows = cmp.rows()
    print(format_table(rows, ("config", "dram_bytes", "seconds", "utilization", "energy_j",
                              "time_vs_baseline", "time_vs_archopt", "traffic_vs_baseline")))
    if args.out:
        write_json(args.out / f"{net.name}_compare.json",
                   {"network": net.name, "memory": mem.name, "mini_batch": n,
                    "unlimited_bandwidth": args.unlimited_bandwidth,
                    "reports": [r.summary() for r in cmp.reports.values()]})
        write_csv(args.out / f"{net.name}_compare_layers.csv",
                  [row for r in cmp.reports.values() for row in layer_rows(r)], LAYER_COLUMNS)
        write_csv(args.out / f"{net.name}_compare_normalized.csv", rows, SUMMARY_COLUMNS)
        print(f"wrote {args.out}/{net.name}_compare.json, _layers.csv and _normalized.csv")
    return 0


def cmd_sweep_buffer(args) -> int:
    net, accel, energy, n = _setup(args)
    mem = load_memory(args.mem)
    configs = _configs(args.config)
    sizes = [int(s * MiB) for s in args.sizes_mib]
    points = sweep_buffer(net, sizes, accel, mem, n, configs, energy)
    ref_cfg = ExecConfig.IL if ExecConfig.IL in configs else configs[0]
    rows = normalize(points, points[0].label, ref_cfg)
    print(f"relative to {ref_cfg.value} at {points[0].label} MiB")
    print(format_table(rows, SWEEP_COLUMNS))
    if args.out:
        write_csv(args.out / f"{net.name}_sweep_buffer.csv", rows, SWEEP_COLUMNS)
    return 0


def cmd_sweep_memory(args) -> int:
    net, accel, energy, n = _setup(args)
    mems = [load_memory(m) for m in args.mems]
    points = sweep_memory(net, mems, accel, n, _configs(args.config), energy)
    rows = normalize(points, mems[0].name)
    print(f"relative to each configuration on {mems[0].name}")
    print(format_table(rows, SWEEP_COLUMNS))
    if args.out:
        write_csv(args.out / f"{net.name}_sweep_memory.csv", rows, SWEEP_COLUMNS)
    return 0


def cmd_verify(args) -> int:
    from .trainer import random_batch, random_tiny_net, relative_delta, train_step_full, train_step_serialized

    worst = 0.0
    for seed in range(args.seeds):
        net = random_tiny_net(seed, norm=args.norm, groups=args.groups)
        x, y = random_batch(seed, batch=args.batch)
        full = train_step_full(net, x, y)
        for s in args.sub_batches:
            if s > args.batch:
                continue
            part = train_step_serialized(net, x, y, s)
            delta = max(relative_delta(full.grads, part.grads).values())
            worst = max(worst, delta)
            print(f"seed {seed} sub_batch {s}: max relative gradient delta {delta:.3e}, "
                  f"loss delta {abs(full.loss - part.loss):.3e}")
    ok = worst <= args.tolerance
    print(f"{'equivalent' if ok else 'NOT equivalent'}: worst {worst:.3e} (tolerance {args.tolerance:g})")
    return 0 if ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep-buffer": cmd_sweep_buffer,
    "sweep-memory": cmd_sweep_memory,
    "verify-equivalence": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (KeyError, NetworkError, ConfigError, InfeasibleError, CapacityError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"wavecore {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
