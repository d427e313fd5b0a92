"""Accelerator, memory and energy configuration, loadable from YAML files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .gemm import ArrayConfig
from .ir.types import Precision

KiB = 1024
MiB = 1024 * KiB
GiB = 1024 * MiB


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AcceleratorConfig:
    """One WaveCore core.  The chip is ``cores`` identical copies."""

    array: ArrayConfig = ArrayConfig()
    global_buffer: int = 10 * MiB
    buffer_reserve: int = 64 * KiB  # GN parameters and control state
    clock_hz: float = 0.7e9
    cores: int = 2
    # bytes per cycle the vector units can stream through the global buffer;
    # sized to the systolic array's own feed (k + n words per cycle)
    vector_bytes_per_cycle: int = 512
    # ReLU and GN overwrite their input in the buffer when it has no other reader
    inplace_elementwise: bool = False
    precision: Precision = Precision()

    def __post_init__(self):
        if self.global_buffer <= self.buffer_reserve:
            raise ConfigError("global_buffer must exceed buffer_reserve")
        if self.clock_hz <= 0 or self.cores < 1 or self.vector_bytes_per_cycle < 1:
            raise ConfigError("clock, cores and vector throughput must be positive")

    @property
    def buffer_budget(self) -> int:
        return self.global_buffer - self.buffer_reserve

    def with_buffer(self, size: int) -> "AcceleratorConfig":
        return dataclasses.replace(self, global_buffer=size)


@dataclass(frozen=True)
class MemoryConfig:
    name: str
    bandwidth: float        # bytes/s for the whole chip
    capacity: int = 8 * GiB
    channels: int = 8
    efficiency: float = 0.85

    def __post_init__(self):
        if self.bandwidth <= 0 or self.capacity <= 0 or self.channels < 1:
            raise ConfigError(f"memory {self.name}: bandwidth, capacity and channels must be positive")
        if not 0 < self.efficiency <= 1:
            raise ConfigError(f"memory {self.name}: efficiency must be in (0, 1]")

    def per_core_bandwidth(self, cores: int) -> float:
        return self.bandwidth * self.efficiency / cores

    @classmethod
    def preset(cls, name: str, **overrides) -> "MemoryConfig":
        key = name.upper()
        if key not in MEMORY_PRESETS:
            raise ConfigError(f"unknown memory preset {name!r}; available: {_preset_names()}")
        return dataclasses.replace(MEMORY_PRESETS[key], **overrides)


MEMORY_PRESETS = {
    "HBM2": MemoryConfig("HBM2", 300 * GiB, 8 * GiB, 8),
    "HBM2X2": MemoryConfig("HBM2x2", 600 * GiB, 16 * GiB, 16),
    "GDDR5": MemoryConfig("GDDR5", 12 * 32 * GiB, 12 * GiB, 12),
    "LPDDR4": MemoryConfig("LPDDR4", 8 * 29.9 * GiB, 16 * GiB, 8),
}


@dataclass(frozen=True)
class EnergyModel:
    """Energy coefficients.  Defaults are placeholders, not measured values."""

    e_mac: float = 1.0e-12       # J per 16b multiply-accumulate
    e_dram: float = 40.0e-12     # J per byte
    e_gbuf: float | None = None  # J per byte; defaults to e_dram / 8
    e_lbuf: float = 0.6e-12      # J per byte
    p_static: float = 6.0        # W per core
    zero_operand_fraction: float = 0.0

    def __post_init__(self):
        if self.e_gbuf is None:
            object.__setattr__(self, "e_gbuf", self.e_dram / 8)
        for name in ("e_mac", "e_dram", "e_gbuf", "e_lbuf", "p_static"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"energy coefficient {name} must be positive")
        if not 0 <= self.zero_operand_fraction < 1:
            raise ConfigError("zero_operand_fraction must be in [0, 1)")


def _preset_names() -> str:
    return ", ".join(m.name for m in MEMORY_PRESETS.values())


# post-ReLU features are commonly about half zeros
POST_RELU_ZERO_FRACTION = 0.5


def _coerce(kind: str, key: str, value: Any, what: str) -> Any:
    # YAML 1.1 reads "0.7e9" as a string; accept it for numeric fields
    if not isinstance(value, str) or kind not in ("int", "float", "float | None"):
        return value
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(f"{what}: {key} must be a number, got {value!r}") from None
    return int(number) if kind == "int" and number.is_integer() else number


def _dataclass_from(cls, raw: Mapping[str, Any], what: str):
    types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(types)
    if unknown:
        raise ConfigError(f"{what}: unknown keys {sorted(unknown)}; expected {sorted(types)}")
    try:
        return cls(**{k: _coerce(types[k], k, v, what) for k, v in raw.items()})
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _load_yaml(path: str | Path) -> dict:
    if not Path(path).is_file():
        raise ConfigError(f"{path}: no such file")
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def _sizes(raw: Mapping[str, Any]) -> dict:
    """Accept ``<name>_kib`` / ``<name>_mib`` spellings for byte sizes."""
    out = {}
    for key, value in raw.items():
        if key.endswith("_kib"):
            out[key[:-4]] = int(value * KiB)
        elif key.endswith("_mib"):
            out[key[:-4]] = int(value * MiB)
        elif key.endswith("_gib"):
            out[key[:-4]] = int(value * GiB)
        else:
            out[key] = value
    return out


def accelerator_from_dict(raw: Mapping[str, Any]) -> AcceleratorConfig:
    raw = _sizes(raw)
    array = _dataclass_from(ArrayConfig, _sizes(raw.pop("array", {}) or {}), "array")
    precision = _dataclass_from(Precision, raw.pop("precision", {}) or {}, "precision")
    return _dataclass_from(AcceleratorConfig, {**raw, "array": array, "precision": precision}, "accelerator")


def memory_from_dict(raw: Mapping[str, Any]) -> MemoryConfig:
    raw = _sizes(raw)
    if "preset" in raw:
        raw = dict(raw)
        return MemoryConfig.preset(raw.pop("preset"), **raw)
    if "bandwidth_gib_s" in raw:
        raw = dict(raw)
        raw["bandwidth"] = raw.pop("bandwidth_gib_s") * GiB
    raw.setdefault("name", "custom")
    return _dataclass_from(MemoryConfig, raw, "memory")


def load_accelerator(path: str | Path | None) -> AcceleratorConfig:
    return AcceleratorConfig() if path is None else accelerator_from_dict(_load_yaml(path))


def load_memory(spec: str | Path | None) -> MemoryConfig:
    """A preset name (HBM2, HBM2x2, GDDR5, LPDDR4) or a YAML file."""
    if spec is None:
        return MemoryConfig.preset("HBM2")
    if str(spec).upper() in MEMORY_PRESETS:
        return MemoryConfig.preset(str(spec))
    if not Path(spec).is_file():
        raise ConfigError(f"{spec!r} is neither a memory preset ({_preset_names()}) nor a file")
    return memory_from_dict(_load_yaml(spec))


def load_energy(path: str | Path | None) -> EnergyModel:
    return EnergyModel() if path is None else _dataclass_from(EnergyModel, _load_yaml(path), "energy")
