"""Runtime configuration and scenario files (TOML).

Example config::

    host = "127.0.0.1"
    port = 5000
    clock = "sim"          # or "real"
    floors = 1
    time_scale = 0.01      # wall seconds per simulated second in real mode

    [durations]
    transport = 4.0

    [machines.sm_1.light_barriers]
    6 = "sink_1"

    [machines.vgr_1.positions]
    delivery_station = "delivery_station"

Example scenario::

    faults = ["mm_1"]

    [[workpiece]]
    id = "wp_1"
    position = "sink_1"
    color = "white"
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .topology import DEFAULT_DURATIONS, Topology, TopologyError, default_topology

ENV_VAR = "FTFLOOR_CONFIG"
_MACHINE_KEYS = {"positions", "light_barriers", "capacitive_sensors"}


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    host: str = "127.0.0.1"
    port: int = 5000
    clock: str = "sim"
    floors: int = 1
    time_scale: float = 0.01
    human_timeout: float | None = None
    human_delay: float = 0.0
    scenario: str | None = None
    durations: dict = field(default_factory=dict)
    machines: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.clock not in ("sim", "real"):
            raise ConfigError(f"clock must be 'sim' or 'real', not {self.clock!r}")
        if self.floors not in (1, 2):
            raise ConfigError("floors must be 1 or 2")
        unknown = set(self.durations) - set(DEFAULT_DURATIONS)
        if unknown:
            raise ConfigError(f"unknown duration categories: {sorted(unknown)}")
        for mid, over in self.machines.items():
            bad = set(over) - _MACHINE_KEYS
            if bad:
                raise ConfigError(f"machines.{mid}: unknown keys {sorted(bad)}")

    @property
    def authority(self) -> str:
        return f"{self.host}:{self.port}"

    def topology(self) -> Topology:
        topo = default_topology(self.floors, self.authority, {k: float(v) for k, v in self.durations.items()})
        return apply_machine_overrides(topo, self.machines) if self.machines else topo


def apply_machine_overrides(topo: Topology, overrides: dict) -> Topology:
    machines = {m.id: m for m in topo.machines}
    owners = dict(topo.owners)
    for mid, over in overrides.items():
        if mid not in machines:
            raise ConfigError(f"unknown machine {mid!r}")
        m = machines[mid]
        changes = {}
        if "positions" in over:
            positions = dict(m.positions)
            for local, world in over["positions"].items():
                if local not in positions:
                    raise ConfigError(f"{mid}: unknown local position {local!r}")
                positions[local] = world
                owners.setdefault(world, mid)
            changes["positions"] = positions
        for key in ("light_barriers", "capacitive_sensors"):
            if key in over:
                try:
                    pins = {int(p): w for p, w in over[key].items()}
                except ValueError:
                    raise ConfigError(f"{mid}.{key}: pin numbers must be integers") from None
                changes[key] = {**getattr(m, key), **pins}
        machines[mid] = replace(m, **changes)
    out = Topology(list(machines.values()), owners, topo.host, dict(topo.durations), topo.floors)
    try:
        out.validate()
    except TopologyError as exc:
        raise ConfigError(str(exc)) from exc
    return out


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Read ``path``, else ``$FTFLOOR_CONFIG``, else return defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return Config()
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(Config)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return Config(**data)


def parse_scenario(text: str) -> tuple[list[dict], list[str]]:
    data = tomllib.loads(text)
    unknown = set(data) - {"workpiece", "faults"}
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return list(data.get("workpiece", [])), list(data.get("faults", []))


def load_scenario(path: str | os.PathLike) -> tuple[list[dict], list[str]]:
    try:
        return parse_scenario(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
