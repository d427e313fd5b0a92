"""Loading network descriptions from YAML text or the bundled zoo."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .graph import NetworkGraph, build_graph
from .types import SchemaError

BUNDLED = ("resnet50", "inception_v3", "inception_v4", "alexnet")


def parse_network(config_text: str) -> NetworkGraph:
    try:
        desc = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"not valid YAML: {exc}") from None
    return build_graph(desc)


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"unknown network {name!r}; available: {', '.join(BUNDLED)}")
    return resources.files("wavecore.ir.networks").joinpath(f"{name}.yaml").read_text()


_cache: dict[str, NetworkGraph] = {}


def load_network(name_or_path: str | Path) -> NetworkGraph:
    """Load a bundled network by id, or a network file by path."""
    key = str(name_or_path)
    if key in BUNDLED:
        if key not in _cache:
            _cache[key] = parse_network(bundled_text(key))
        return _cache[key]
    path = Path(key)
    if not path.exists():
        raise KeyError(f"unknown network {key!r}; available: {', '.join(BUNDLED)} or a path to a .yaml file")
    return parse_network(path.read_text())
