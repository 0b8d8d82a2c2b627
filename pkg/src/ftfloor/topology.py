"""Shop-floor layout: machines, positions, sensors and the per-resource service counts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

DEFAULT_HOST = "127.0.0.1:5000"

MACHINE_KINDS = (
    "drilling_machine",
    "high_bay_warehouse",
    "milling_machine",
    "oven",
    "punching_machine",
    "sorting_machine",
    "vacuum_gripper_robot",
    "workstation_transport",
)

KIND_TITLES = {
    "drilling_machine": "Drilling Machine",
    "high_bay_warehouse": "High-Bay Warehouse",
    "milling_machine": "Milling Machine",
    "oven": "Oven",
    "punching_machine": "Punching Machine",
    "sorting_machine": "Sorting Machine",
    "vacuum_gripper_robot": "Vacuum Gripper Robot",
    "workstation_transport": "Workstation Transport",
}

# Expansion count of every base service, per machine kind, in display order.
SERVICE_COUNTS: dict[str, dict[str, int]] = {
    "drilling_machine": {
        "calibrate": 1,
        "drill": 2,
        "transportFromTo": 3,
        "getMotorSpeed": 3,
        "setMotorSpeed": 3,
        "resetAllMotors": 1,
        "capacitiveSensor": 3,
        "statusOfLightBarrier": 2,
        "stateOfMachine": 1,
    },
    "high_bay_warehouse": {
        "calibrate": 4,
        "changeBuckets": 81,
        "store": 10,
        "unload": 10,
        "getMotorSpeed": 4,
        "setMotorSpeed": 4,
        "resetAllMotors": 1,
        "statusOfLightBarrier": 4,
        "stateOfMachine": 1,
        "getAmountOfStoredWorkpieces": 1,
    },
    "milling_machine": {
        "calibrate": 1,
        "mill": 4,
        "moveFromTo": 6,
        "transportFromTo": 6,
        "checkPosition": 3,
        "getMotorSpeed": 3,
        "setMotorSpeed": 3,
        "resetAllMotors": 1,
        "statusOfLightBarrier": 1,
        "stateOfMachine": 1,
    },
    "oven": {
        "calibrate": 1,
        "burn": 2,
        "getMotorSpeed": 1,
        "setMotorSpeed": 1,
        "resetAllMotors": 1,
        "statusOfLightBarrier": 1,
        "stateOfMachine": 1,
    },
    "punching_machine": {
        "calibrate": 1,
        "punch": 2,
        "transportFromTo": 3,
        "getMotorSpeed": 3,
        "setMotorSpeed": 3,
        "resetAllMotors": 1,
        "capacitiveSensor": 3,
        "statusOfLightBarrier": 2,
        "stateOfMachine": 1,
    },
    "sorting_machine": {
        "sort": 20,
        "getMotorSpeed": 1,
        "setMotorSpeed": 1,
        "resetAllMotors": 1,
        "statusOfLightBarrier": 5,
        "stateOfMachine": 1,
    },
    "vacuum_gripper_robot": {
        "calibrate": 4,
        "moveTo": 9,
        "pickUpAndTransport": 72,
        "checkPosition": 9,
        "getMotorSpeed": 3,
        "setMotorSpeed": 3,
        "resetAllMotors": 1,
        "stateOfMachine": 1,
    },
    "workstation_transport": {
        "calibrate": 1,
        "moveTo": 2,
        "pickUpAndTransport": 2,
        "checkPosition": 2,
        "getMotorSpeed": 3,
        "setMotorSpeed": 3,
        "resetAllMotors": 1,
        "stateOfMachine": 1,
    },
}

# Reference aggregate count; the per-cell counts above sum to 341.
REFERENCE_TOTAL = 336

DEFAULT_DURATIONS = {
    "transport": 5.0,
    "process": 8.0,
    "storage": 6.0,
    "calibrate": 3.0,
    "adjust": 1.0,
    "sensing": 0.05,
}

COLORS = ("white", "red", "blue", "yellow")


class TopologyError(ValueError):
    pass


@dataclass
class MachineSpec:
    id: str
    kind: str
    url_prefix: str
    # local position name (as it appears in URLs) -> world position id
    positions: dict[str, str] = field(default_factory=dict)
    motors: tuple[str, ...] = ()
    # controller pin -> monitored world position
    light_barriers: dict[int, str] = field(default_factory=dict)
    capacitive_sensors: dict[int, str] = field(default_factory=dict)
    slots: tuple[str, ...] = ()
    references: tuple[str, ...] = ()
    # drilling/punching routes: route name -> (local from, local to)
    routes: dict[str, tuple[str, str]] = field(default_factory=dict)
    # local position where in-place processing happens
    station: str | None = None
    # local position used as the warehouse handover tray
    handover: str | None = None
    ejections: tuple[str, ...] = ()
    entry: str | None = None
    floor: int = 1

    @property
    def label(self) -> str:
        """Upper-case id as used in individual names, e.g. ``VGR_1``."""
        return self.id.upper()

    def world(self, local: str) -> str:
        try:
            return self.positions[local]
        except KeyError:
            raise TopologyError(f"{self.id} has no position {local!r}") from None

    def local(self, world: str) -> str | None:
        for name, w in self.positions.items():
            if w == world:
                return name
        return None


@dataclass(frozen=True)
class Sensor:
    machine: str
    kind: str  # "light_barrier" | "capacitive"
    pin: int


@dataclass
class Topology:
    machines: list[MachineSpec]
    # world position id -> owning machine id
    owners: dict[str, str]
    host: str = DEFAULT_HOST
    durations: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DURATIONS))
    floors: int = 1

    def __post_init__(self):
        self._by_id = {m.id: m for m in self.machines}

    def machine(self, machine_id: str) -> MachineSpec:
        try:
            return self._by_id[machine_id]
        except KeyError:
            raise TopologyError(f"unknown machine {machine_id!r}") from None

    def has_machine(self, machine_id: str) -> bool:
        return machine_id in self._by_id

    def by_prefix(self, prefix: str) -> list[MachineSpec]:
        return [m for m in self.machines if m.url_prefix == prefix]

    @property
    def world_positions(self) -> list[str]:
        return sorted(self.owners)

    def owner(self, world: str) -> str:
        try:
            return self.owners[world]
        except KeyError:
            raise TopologyError(f"unknown position {world!r}") from None

    def sensor_at(self, world: str) -> Sensor | None:
        """Primary occupancy sensor of a world position; light barriers win over capacitive."""
        m = self._by_id[self.owner(world)]
        for pin, pos in sorted(m.light_barriers.items()):
            if pos == world:
                return Sensor(m.id, "light_barrier", pin)
        for pin, pos in sorted(m.capacitive_sensors.items()):
            if pos == world:
                return Sensor(m.id, "capacitive", pin)
        return None

    @property
    def slots(self) -> list[tuple[str, str]]:
        """All (warehouse, slot) pairs."""
        return [(m.id, s) for m in self.machines for s in m.slots]

    def validate(self) -> None:
        kinds = {}
        for m in self.machines:
            if m.kind not in MACHINE_KINDS:
                raise TopologyError(f"{m.id}: unknown machine kind {m.kind!r}")
            kinds.setdefault(m.kind, []).append(m)
            for world in m.positions.values():
                if world not in self.owners:
                    raise TopologyError(f"{m.id}: position {world!r} has no owner")
            for pins in (m.light_barriers, m.capacitive_sensors):
                for pin, world in pins.items():
                    if self.owners.get(world) != m.id:
                        raise TopologyError(f"{m.id}: pin {pin} monitors foreign position {world!r}")
            if set(m.light_barriers) & set(m.capacitive_sensors):
                raise TopologyError(f"{m.id}: duplicate pin numbers")
            for frm, to in m.routes.values():
                m.world(frm), m.world(to)
            if m.station is not None:
                m.world(m.station)
            if m.handover is not None:
                m.world(m.handover)
        for world, owner in self.owners.items():
            if owner not in self._by_id:
                raise TopologyError(f"position {world!r} owned by unknown machine {owner!r}")
        missing = [k for k in MACHINE_KINDS if k not in kinds]
        if missing:
            raise TopologyError(f"topology lacks machine kinds: {', '.join(missing)}")


def _floor_name(name: str, floor: int) -> str:
    return name if floor == 1 else f"{name}_f{floor}"


def _floor_machines(floor: int) -> tuple[list[MachineSpec], dict[str, str]]:
    w = lambda name: _floor_name(name, floor)  # noqa: E731
    i = floor
    vgr_positions = (
        "sink_1",
        "sink_2",
        "sink_3",
        "oven",
        "high_bay_warehouse",
        "drilling_machine",
        "punching_machine",
        "delivery_station",
        "storage_buffer",
    )
    machines = [
        MachineSpec(
            id=f"dm_{i}",
            kind="drilling_machine",
            url_prefix="dm",
            positions={"entry": w("drilling_machine"), "machine": w("dm_tool"), "exit": w("dm_exit")},
            motors=("conveyor", "turntable", "drill"),
            light_barriers={1: w("drilling_machine"), 2: w("dm_exit")},
            capacitive_sensors={3: w("drilling_machine"), 4: w("dm_tool"), 5: w("dm_exit")},
            routes={
                "entry_to_machine": ("entry", "machine"),
                "machine_to_exit": ("machine", "exit"),
                "entry_to_exit": ("entry", "exit"),
            },
            station="machine",
            floor=floor,
        ),
        MachineSpec(
            id=f"hbw_{i}",
            kind="high_bay_warehouse",
            url_prefix="hbw",
            positions={"handover": w("high_bay_warehouse")},
            motors=("conveyor", "horizontal", "vertical", "cantilever"),
            light_barriers={
                1: w("high_bay_warehouse"),
                2: w("hbw_conveyor_inner"),
                3: w("hbw_lift"),
                4: w("hbw_cantilever"),
            },
            slots=tuple(f"s{n}" for n in range(1, 10)),
            references=("ref_1", "ref_2", "ref_3", "ref_4"),
            handover="handover",
            floor=floor,
        ),
        MachineSpec(
            id=f"mm_{i}",
            kind="milling_machine",
            url_prefix="mm",
            positions={"pos_input": w("milling_machine"), "pos_milling": w("pos_milling"), "pos_output": w("sm_entry")},
            motors=("turntable", "mill", "conveyor"),
            light_barriers={1: w("milling_machine")},
            station="pos_milling",
            floor=floor,
        ),
        MachineSpec(
            id=f"ov_{i}",
            kind="oven",
            url_prefix="ov",
            positions={"oven": w("oven")},
            motors=("feeder",),
            light_barriers={5: w("oven")},
            station="oven",
            floor=floor,
        ),
        MachineSpec(
            id=f"pm_{i}",
            kind="punching_machine",
            url_prefix="pm",
            positions={"entry": w("punching_machine"), "machine": w("pm_tool"), "exit": w("pm_exit")},
            motors=("conveyor", "turntable", "punch"),
            light_barriers={1: w("punching_machine"), 2: w("pm_exit")},
            capacitive_sensors={3: w("punching_machine"), 4: w("pm_tool"), 5: w("pm_exit")},
            routes={
                "entry_to_machine": ("entry", "machine"),
                "machine_to_exit": ("machine", "exit"),
                "entry_to_exit": ("entry", "exit"),
            },
            station="machine",
            floor=floor,
        ),
        MachineSpec(
            id=f"sm_{i}",
            kind="sorting_machine",
            url_prefix="sm",
            positions={
                "entry": w("sm_entry"),
                "sink_1": w("sink_1"),
                "sink_2": w("sink_2"),
                "sink_3": w("sink_3"),
                "reject": w("reject"),
                "pass_through": w("pass_through"),
            },
            motors=("conveyor",),
            light_barriers={1: w("sm_entry"), 2: w("reject"), 6: w("sink_1"), 7: w("sink_2"), 8: w("sink_3")},
            ejections=("sink_1", "sink_2", "sink_3", "reject", "pass_through"),
            entry="entry",
            floor=floor,
        ),
        MachineSpec(
            id=f"vgr_{i}",
            kind="vacuum_gripper_robot",
            url_prefix="vgr",
            positions={p: w(p) for p in vgr_positions},
            motors=("vertical", "horizontal", "rotation"),
            references=("ref_1", "ref_2", "ref_3", "ref_4"),
            floor=floor,
        ),
        MachineSpec(
            id=f"wt_{i}",
            kind="workstation_transport",
            url_prefix="wt",
            positions={"oven": w("oven"), "milling_machine": w("milling_machine")},
            motors=("rotation", "conveyor", "vacuum"),
            floor=floor,
        ),
    ]
    owners = {}
    for name in ("sink_1", "sink_2", "sink_3", "sm_entry", "reject", "pass_through"):
        owners[w(name)] = f"sm_{i}"
    owners[w("oven")] = f"ov_{i}"
    for name in ("high_bay_warehouse", "hbw_conveyor_inner", "hbw_lift", "hbw_cantilever"):
        owners[w(name)] = f"hbw_{i}"
    for name in ("drilling_machine", "dm_tool", "dm_exit"):
        owners[w(name)] = f"dm_{i}"
    for name in ("punching_machine", "pm_tool", "pm_exit"):
        owners[w(name)] = f"pm_{i}"
    for name in ("milling_machine", "pos_milling"):
        owners[w(name)] = f"mm_{i}"
    for name in ("delivery_station", "storage_buffer"):
        owners[w(name)] = f"vgr_{i}"
    return machines, owners


def default_topology(floors: int = 1, host: str = DEFAULT_HOST, durations: dict | None = None) -> Topology:
    if floors not in (1, 2):
        raise TopologyError("floors must be 1 or 2")
    machines, owners = [], {}
    for floor in range(1, floors + 1):
        ms, os_ = _floor_machines(floor)
        machines += ms
        owners.update(os_)
    topo = Topology(
        machines=machines,
        owners=owners,
        host=host,
        durations={**DEFAULT_DURATIONS, **(durations or {})},
        floors=floors,
    )
    topo.validate()
    return topo


def with_overrides(topo: Topology, *, host=None, durations=None) -> Topology:
    return replace(
        topo,
        machines=list(topo.machines),
        owners=dict(topo.owners),
        host=host or topo.host,
        durations={**topo.durations, **(durations or {})},
    )
