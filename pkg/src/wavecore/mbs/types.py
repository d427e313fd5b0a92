"""Execution configurations, layer groups and schedules."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from typing import Any, Mapping

from ..gemm import WaveMode


class InfeasibleError(ValueError):
    """A layer or block does not fit the buffer even with a single sample."""

    def __init__(self, message: str, unit_id: str | None = None):
        self.unit_id = unit_id
        super().__init__(f"{unit_id}: {message}" if unit_id else message)


class ExecConfig(str, enum.Enum):
    BASELINE = "Baseline"
    ARCH_OPT = "ArchOpt"
    IL = "IL"
    MBS_FS = "MBS-FS"
    MBS1 = "MBS1"
    MBS2 = "MBS2"

    @classmethod
    def parse(cls, text: str) -> "ExecConfig":
        norm = text.replace("_", "-").lower()
        for c in cls:
            if c.value.lower() == norm or c.name.lower().replace("_", "-") == norm:
                return c
        raise ValueError(f"unknown config {text!r}; choose from {', '.join(c.value for c in cls)}")

    @property
    def is_mbs(self) -> bool:
        return self in (ExecConfig.MBS_FS, ExecConfig.MBS1, ExecConfig.MBS2)

    @property
    def block_mode(self) -> bool:
        return self is ExecConfig.MBS2

    @property
    def wave_mode(self) -> WaveMode:
        return WaveMode.GAPPED if self is ExecConfig.BASELINE else WaveMode.DOUBLE_BUFFERED


ALL_CONFIGS = tuple(ExecConfig)


@dataclass(frozen=True)
class LayerGroup:
    member_ids: tuple[str, ...]   # units (layer or block ids) in schedule order
    layer_ids: tuple[str, ...]
    sub_batch: int
    iterations: int
    buffer_budget_bytes: int
    resident: bool = True         # False: every layer streams through DRAM on its own
    footprint_bytes: int = 0      # largest member footprint per sample

    def __post_init__(self):
        if self.sub_batch < 1 or self.iterations < 1:
            raise ValueError("sub_batch and iterations must be positive")

    def iteration_sizes(self, mini_batch: int) -> list[tuple[int, int]]:
        """(samples, count) pairs covering the mini-batch."""
        last = mini_batch - (self.iterations - 1) * self.sub_batch
        if last == self.sub_batch:
            return [(self.sub_batch, self.iterations)]
        return [(self.sub_batch, self.iterations - 1), (last, 1)]


@dataclass(frozen=True)
class MbsSchedule:
    network: str
    config: ExecConfig
    mini_batch: int
    groups: tuple[LayerGroup, ...]

    @property
    def block_mode(self) -> bool:
        return self.config.block_mode

    def group_of(self) -> dict[str, LayerGroup]:
        return {lid: g for g in self.groups for lid in g.layer_ids}

    @property
    def total_iterations(self) -> int:
        return sum(g.iterations for g in self.groups)

    def to_dict(self) -> dict[str, Any]:
        return {
            "network": self.network,
            "config": self.config.value,
            "mini_batch": self.mini_batch,
            "groups": [asdict(g) for g in self.groups],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "MbsSchedule":
        groups = tuple(
            LayerGroup(**{**g, "member_ids": tuple(g["member_ids"]), "layer_ids": tuple(g["layer_ids"])})
            for g in raw["groups"])
        return cls(raw["network"], ExecConfig.parse(raw["config"]), int(raw["mini_batch"]), groups)

    @classmethod
    def from_json(cls, text: str) -> "MbsSchedule":
        return cls.from_dict(json.loads(text))
