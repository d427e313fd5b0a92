"""Stable-schema JSON and CSV emission for simulation results."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .mbs.traffic import CATEGORIES
from .mbs.types import MbsSchedule
from .sim import SimReport

LAYER_COLUMNS = (
    "network", "config", "layer", "kind", "group", "dram_bytes", *CATEGORIES,
    "gbuf_bytes", "lbuf_bytes", "macs", "compute_cycles", "memory_cycles", "wall_cycles", "utilization",
)

SUMMARY_COLUMNS = (
    "network", "config", "memory", "mini_batch", "dram_bytes", "wall_cycles", "seconds",
    "utilization", "energy_j", "time_vs_baseline", "time_vs_archopt",
    "traffic_vs_baseline", "traffic_vs_archopt", "energy_vs_baseline", "energy_vs_archopt",
)

SWEEP_COLUMNS = ("point", "config", "dram_bytes", "wall_cycles", "traffic_rel", "time_rel")


def layer_rows(report: SimReport) -> list[dict]:
    rows = []
    for l in report.layers:
        row = {"network": report.network, "config": report.config.value, "layer": l.layer_id,
               "kind": l.kind, "group": l.group, "dram_bytes": l.dram_bytes}
        row.update(l.ledger.as_dict())
        row.update(gbuf_bytes=l.gbuf_bytes, lbuf_bytes=l.lbuf_bytes, macs=l.macs,
                   compute_cycles=l.compute_cycles, memory_cycles=round(l.memory_cycles, 3),
                   wall_cycles=round(l.wall_cycles, 3),
                   utilization="" if l.utilization is None else round(l.utilization, 6))
        rows.append(row)
    return rows


def write_csv(path: str | Path, rows: Iterable[Mapping], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return path


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
    return path


def report_payload(report: SimReport, schedule: MbsSchedule | None = None) -> dict:
    out = report.summary()
    if schedule is not None:
        out["schedule"] = schedule.to_dict()
    return out


def format_table(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    """Plain fixed-width table for the terminal."""
    def cell(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        return "" if v is None else str(v)

    cells = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
