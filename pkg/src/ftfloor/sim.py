"""Deterministic digital twin of the shop floor.

State is immutable from the caller's point of view: ``apply`` and
``inject_fault`` return new ``FactoryState`` objects and never touch their input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .catalog import PROCESSES, ServiceDescription, movement, snake_case
from .topology import COLORS, Topology, TopologyError

FLAGS = ("burned", "milled", "drilled", "punched", "sorted")
SENSOR_KINDS = (
    "state_of_machine",
    "status_of_light_barrier",
    "capacitive_sensor",
    "check_position",
    "get_motor_speed",
    "get_amount_of_stored_workpieces",
    "read_rfid",
)


class SimError(Exception):
    error_type = "sim_error"


class MachineError(SimError):
    error_type = "machine_error"


class NotApplicable(SimError):
    error_type = "not_applicable"


class ResourceFull(SimError):
    error_type = "resource_full"


class UnknownSensor(SimError):
    error_type = "unknown_sensor"


class ScenarioError(SimError):
    error_type = "scenario_error"


@dataclass(frozen=True)
class Workpiece:
    id: str
    color: str = "white"
    position: str | None = None
    slot: tuple[str, str] | None = None  # (warehouse id, slot name)
    flags: frozenset = frozenset()

    def to_dict(self):
        return {
            "id": self.id,
            "color": self.color,
            "position": self.position,
            "slot": list(self.slot) if self.slot else None,
            "flags": sorted(self.flags),
        }


@dataclass(frozen=True)
class MachineRuntime:
    id: str
    state: str = "ready"
    motor_speeds: dict = field(default_factory=dict)
    position: str | None = None  # VGR/WT location, milling table position
    reference: str | None = None

    def to_dict(self):
        return {
            "id": self.id,
            "state": self.state,
            "motor_speeds": dict(sorted(self.motor_speeds.items())),
            "position": self.position,
            "reference": self.reference,
        }


@dataclass(frozen=True)
class FactoryState:
    topology: Topology = field(compare=False, repr=False)
    clock: float = 0.0
    workpieces: dict = field(default_factory=dict)
    machines: dict = field(default_factory=dict)

    def occupant(self, world: str) -> str | None:
        for wp in self.workpieces.values():
            if wp.position == world:
                return wp.id
        return None

    def slot_occupant(self, warehouse: str, slot: str) -> str | None:
        for wp in self.workpieces.values():
            if wp.slot == (warehouse, slot):
                return wp.id
        return None

    def to_dict(self):
        return {
            "clock": self.clock,
            "workpieces": {k: v.to_dict() for k, v in sorted(self.workpieces.items())},
            "machines": {k: v.to_dict() for k, v in sorted(self.machines.items())},
        }

    def snapshot(self) -> str:
        """Canonical text dump; equal snapshots mean bit-identical states."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def with_machine(self, machine_id: str, **changes) -> "FactoryState":
        machines = dict(self.machines)
        machines[machine_id] = replace(machines[machine_id], **changes)
        return replace(self, machines=machines)


@dataclass(frozen=True)
class TransitionResult:
    new_state: FactoryState
    duration: float
    events: list


_INITIAL_POSITIONS = {
    "vacuum_gripper_robot": "delivery_station",
    "workstation_transport": "milling_machine",
    "milling_machine": "pos_input",
}


def initial_state(topo: Topology, scenario=(), faults=()) -> FactoryState:
    """Build a fresh state: every machine ready, clock at zero.

    ``scenario`` is a list of placements, each a dict with ``id``, ``color``
    and either ``position`` (world position) or ``slot`` (plus optional
    ``warehouse``, defaulting to the first one).
    """
    machines = {}
    for m in topo.machines:
        machines[m.id] = MachineRuntime(
            id=m.id,
            motor_speeds={name: 0 for name in m.motors},
            position=_INITIAL_POSITIONS.get(m.kind),
        )
    workpieces = {}
    taken = set()
    for p in scenario:
        wid = p["id"]
        if wid in workpieces:
            raise ScenarioError(f"duplicate workpiece id {wid!r}")
        color = p.get("color", "white")
        if color not in COLORS:
            raise ScenarioError(f"unknown color {color!r}")
        if "slot" in p:
            hbw = p.get("warehouse") or next(m.id for m in topo.machines if m.slots)
            if p["slot"] not in topo.machine(hbw).slots:
                raise ScenarioError(f"unknown slot {p['slot']!r}")
            where = (hbw, p["slot"])
            wp = Workpiece(wid, color, slot=where, flags=frozenset(p.get("flags", ())))
        else:
            where = p["position"]
            if where not in topo.owners:
                raise ScenarioError(f"unknown position {where!r}")
            wp = Workpiece(wid, color, position=where, flags=frozenset(p.get("flags", ())))
        if where in taken:
            raise ScenarioError(f"duplicate placement at {where!r}")
        taken.add(where)
        workpieces[wid] = wp
    state = FactoryState(topo, 0.0, workpieces, machines)
    for m in faults:
        state = inject_fault(state, m, "on")
    return state


def inject_fault(state: FactoryState, machine: str, mode: str) -> FactoryState:
    if machine not in state.machines:
        raise TopologyError(f"unknown machine {machine!r}")
    if mode not in ("on", "off"):
        raise ValueError(f"mode must be 'on' or 'off', not {mode!r}")
    target = "error" if mode == "on" else "ready"
    if state.machines[machine].state == target:
        return state
    return state.with_machine(machine, state=target)


def _bool(v: bool) -> str:
    return "true" if v else "false"


def read_sensor(state: FactoryState, machine: str, sensor_kind: str, selector=None) -> dict[str, str]:
    topo = state.topology
    if not topo.has_machine(machine):
        raise UnknownSensor(f"unknown machine {machine!r}")
    m = topo.machine(machine)
    rt = state.machines[machine]
    if sensor_kind == "state_of_machine":
        return {"state": rt.state}
    if sensor_kind == "status_of_light_barrier":
        try:
            world = m.light_barriers[int(selector)]
        except (KeyError, TypeError, ValueError):
            raise UnknownSensor(f"{machine} has no light barrier {selector!r}") from None
        return {"interrupted": _bool(state.occupant(world) is not None)}
    if sensor_kind == "capacitive_sensor":
        world = m.positions.get(selector)
        if world is None or world not in m.capacitive_sensors.values():
            raise UnknownSensor(f"{machine} has no capacitive sensor at {selector!r}")
        return {"detected": _bool(state.occupant(world) is not None)}
    if sensor_kind == "check_position":
        if selector not in m.positions or rt.position is None:
            raise UnknownSensor(f"{machine} cannot report position {selector!r}")
        return {"at_position": _bool(rt.position == selector)}
    if sensor_kind == "get_motor_speed":
        if selector not in rt.motor_speeds:
            raise UnknownSensor(f"{machine} has no motor {selector!r}")
        return {"speed": str(rt.motor_speeds[selector])}
    if sensor_kind == "get_amount_of_stored_workpieces":
        if not m.slots:
            raise UnknownSensor(f"{machine} has no storage")
        n = sum(1 for wp in state.workpieces.values() if wp.slot and wp.slot[0] == machine)
        return {"amount": str(n)}
    if sensor_kind == "read_rfid":
        if selector not in topo.owners:
            raise UnknownSensor(f"no RFID read point at {selector!r}")
        return {"tag": state.occupant(selector) or "none"}
    raise UnknownSensor(f"unknown sensor kind {sensor_kind!r}")


_SELECTOR_PARAM = {
    "status_of_light_barrier": "lb",
    "capacitive_sensor": "position",
    "check_position": "position",
    "get_motor_speed": "motor",
}


def read_service(state: FactoryState, service: ServiceDescription) -> dict[str, str]:
    """Answer a sensing service from the catalog."""
    kind = snake_case(service.base_name)
    param = _SELECTOR_PARAM.get(kind)
    return read_sensor(state, service.provider, kind, service.parameters.get(param) if param else None)


def _move(state: FactoryState, wid: str, **changes) -> FactoryState:
    workpieces = dict(state.workpieces)
    workpieces[wid] = replace(workpieces[wid], **changes)
    return replace(state, workpieces=workpieces)


def apply(state: FactoryState, service: ServiceDescription, inputs: dict | None = None) -> TransitionResult:
    """Execute one actuation service against ``state``; raises ``SimError`` on failure."""
    if service.kind != "actuation":
        raise NotApplicable(f"{service.base_name} is a sensing service")
    topo = state.topology
    m = topo.machine(service.provider)
    rt = state.machines[m.id]
    if rt.state == "error":
        raise MachineError(f"{m.id} is in error state")
    if rt.state != "ready":
        raise NotApplicable(f"{m.id} is {rt.state}")
    params = service.parameters
    base = service.base_name
    events = []
    new = state

    move = movement(m, base, params)
    if move is not None:
        frm, to = move
        wid = state.occupant(frm)
        if wid is None:
            raise NotApplicable(f"no workpiece at {frm}")
        if state.occupant(to) is not None:
            raise NotApplicable(f"{to} is occupied")
        flags = state.workpieces[wid].flags
        if base == "sort":
            if state.workpieces[wid].color != params["color"]:
                raise NotApplicable(f"{wid} is {state.workpieces[wid].color}, not {params['color']}")
            flags = flags | {"sorted"}
        new = _move(new, wid, position=to, flags=flags)
        if m.kind in ("vacuum_gripper_robot", "workstation_transport", "milling_machine") and "end" in params:
            new = new.with_machine(m.id, position=params["end"])
        events.append(f"{wid} {frm} -> {to}")
    elif base in PROCESSES:
        here = m.world(m.station)
        wid = state.occupant(here)
        if wid is None:
            raise NotApplicable(f"no workpiece at {here}")
        new = _move(new, wid, flags=state.workpieces[wid].flags | {PROCESSES[base]})
        events.append(f"{wid} {PROCESSES[base]}")
    elif base == "store":
        tray = m.world(m.handover)
        wid = state.occupant(tray)
        if wid is None:
            raise NotApplicable(f"no workpiece at {tray}")
        slot = params["slot"]
        if slot == "auto":
            free = [s for s in m.slots if state.slot_occupant(m.id, s) is None]
            if not free:
                raise ResourceFull(f"{m.id} has no empty slot")
            slot = free[0]
        elif state.slot_occupant(m.id, slot) is not None:
            raise NotApplicable(f"slot {slot} is occupied")
        new = _move(new, wid, position=None, slot=(m.id, slot))
        events.append(f"{wid} stored in {m.id}/{slot}")
    elif base == "unload":
        tray = m.world(m.handover)
        if state.occupant(tray) is not None:
            raise NotApplicable(f"{tray} is occupied")
        slot = params["slot"]
        if slot == "auto":
            used = [s for s in m.slots if state.slot_occupant(m.id, s) is not None]
            if not used:
                raise NotApplicable(f"{m.id} is empty")
            slot = used[0]
        wid = state.slot_occupant(m.id, slot)
        if wid is None:
            raise NotApplicable(f"slot {slot} is empty")
        new = _move(new, wid, position=tray, slot=None)
        events.append(f"{wid} unloaded from {m.id}/{slot}")
    elif base == "changeBuckets":
        a, b = params["start"], params["end"]
        wa, wb = state.slot_occupant(m.id, a), state.slot_occupant(m.id, b)
        if wa is not None:
            new = _move(new, wa, slot=(m.id, b))
        if wb is not None:
            new = _move(new, wb, slot=(m.id, a))
        events.append(f"{m.id} swapped {a} <-> {b}")
    elif base == "calibrate":
        new = new.with_machine(m.id, reference=params.get("reference", "default"))
        events.append(f"{m.id} calibrated")
    elif base == "setMotorSpeed":
        raw = (inputs or {}).get("speed", "500")
        try:
            speed = int(raw)
        except ValueError:
            raise NotApplicable(f"bad speed {raw!r}") from None
        if not 0 <= speed <= 1000:
            raise NotApplicable(f"speed {speed} outside 0..1000")
        speeds = dict(rt.motor_speeds)
        speeds[params["motor"]] = speed
        new = new.with_machine(m.id, motor_speeds=speeds)
        events.append(f"{m.id}.{params['motor']} speed {speed}")
    elif base == "resetAllMotors":
        new = new.with_machine(m.id, motor_speeds={k: 0 for k in rt.motor_speeds})
        events.append(f"{m.id} motors reset")
    elif base == "moveTo":
        new = new.with_machine(m.id, position=params["position"])
        events.append(f"{m.id} at {params['position']}")
    else:
        raise NotApplicable(f"no effect defined for {base}")

    duration = service.nominal_duration
    new = replace(new, clock=state.clock + duration)
    return TransitionResult(new, duration, [(new.clock, e) for e in events])


def check_invariants(state: FactoryState) -> None:
    seen = {}
    for wp in state.workpieces.values():
        if (wp.position is None) == (wp.slot is None):
            raise AssertionError(f"{wp.id} must have exactly one of position/slot")
        where = wp.position or wp.slot
        if where in seen:
            raise AssertionError(f"{wp.id} and {seen[where]} share {where}")
        seen[where] = wp.id
        if not set(wp.flags) <= set(FLAGS):
            raise AssertionError(f"{wp.id} has unknown flags {wp.flags}")
