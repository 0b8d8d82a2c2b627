"""Compile a service catalog into a STRIPS domain and a factory state into a problem."""

from __future__ import annotations

from dataclasses import dataclass

from ..catalog import PROCESSES, ServiceCatalog, generate, movement, snake_case
from ..sim import FactoryState
from ..topology import COLORS, MACHINE_KINDS, Topology
from .syntax import REQUIREMENTS, Atom, PddlSyntaxError, atom_text

DOMAIN_NAME = "ftfloor"
PREFIX = {
    "drilling_machine": "dm",
    "high_bay_warehouse": "hbw",
    "milling_machine": "mm",
    "oven": "ov",
    "punching_machine": "pm",
    "sorting_machine": "sm",
    "vacuum_gripper_robot": "vgr",
    "workstation_transport": "wt",
}
WORKPIECE_BASES = {
    "pickUpAndTransport",
    "transportFromTo",
    "moveFromTo",
    "sort",
    "store",
    "unload",
    "changeBuckets",
    *PROCESSES,
}

PREDICATES = {
    "at": [("?w", "workpiece"), ("?p", "position")],
    "burned": [("?w", "workpiece")],
    "drilled": [("?w", "workpiece")],
    "handover": [("?m", "machine"), ("?p", "position")],
    "has-color": [("?w", "workpiece"), ("?c", "color")],
    "milled": [("?w", "workpiece")],
    "occupied": [("?p", "position")],
    "owner": [("?p", "position"), ("?m", "machine")],
    "punched": [("?w", "workpiece")],
    "ready": [("?m", "machine")],
    "route": [("?m", "machine"), ("?from", "position"), ("?to", "position")],
    "slot-free": [("?s", "slot")],
    "slot-of": [("?s", "slot"), ("?m", "machine")],
    "sorted": [("?w", "workpiece")],
    "station": [("?m", "machine"), ("?p", "position")],
    "stored": [("?w", "workpiece"), ("?s", "slot")],
    "wt-at": [("?p", "position")],
}


@dataclass(frozen=True)
class ActionTemplate:
    name: str
    parameters: tuple[tuple[str, str], ...]
    pre: tuple[str, ...]  # literal texts, "(not ...)" allowed
    effect: tuple[str, ...]


def action_name(kind: str, base: str) -> str:
    return f"{PREFIX[kind]}_{snake_case(base)}"


def _move_template(kind: str, base: str) -> ActionTemplate:
    pre = [
        "(route ?m ?from ?to)",
        "(owner ?to ?d)",
        "(ready ?m)",
        "(ready ?d)",
        "(at ?w ?from)",
        "(occupied ?from)",
        "(not (occupied ?to))",
    ]
    eff = ["(not (at ?w ?from))", "(not (occupied ?from))", "(at ?w ?to)", "(occupied ?to)"]
    if kind == "vacuum_gripper_robot":
        pre.append("(not (wt-at ?to))")
    if kind == "workstation_transport":
        eff += ["(not (wt-at ?from))", "(wt-at ?to)"]
    params = (("?m", kind), ("?w", "workpiece"), ("?from", "position"), ("?to", "position"), ("?d", "machine"))
    return ActionTemplate(action_name(kind, base), params, tuple(pre), tuple(eff))


def template(kind: str, base: str) -> ActionTemplate:
    name = action_name(kind, base)
    if base in ("pickUpAndTransport", "transportFromTo", "moveFromTo"):
        return _move_template(kind, base)
    if base in PROCESSES:
        return ActionTemplate(
            name,
            (("?m", kind), ("?w", "workpiece"), ("?p", "position")),
            ("(station ?m ?p)", "(ready ?m)", "(at ?w ?p)", "(occupied ?p)"),
            (f"({PROCESSES[base]} ?w)",),
        )
    if base == "sort":
        return ActionTemplate(
            name,
            (("?m", kind), ("?w", "workpiece"), ("?c", "color"), ("?from", "position"), ("?to", "position")),
            (
                "(route ?m ?from ?to)",
                "(ready ?m)",
                "(at ?w ?from)",
                "(occupied ?from)",
                "(has-color ?w ?c)",
                "(not (occupied ?to))",
            ),
            ("(not (at ?w ?from))", "(not (occupied ?from))", "(at ?w ?to)", "(occupied ?to)", "(sorted ?w)"),
        )
    if base == "store":
        return ActionTemplate(
            name,
            (("?m", kind), ("?w", "workpiece"), ("?p", "position"), ("?s", "slot")),
            ("(handover ?m ?p)", "(slot-of ?s ?m)", "(ready ?m)", "(at ?w ?p)", "(occupied ?p)", "(slot-free ?s)"),
            ("(not (at ?w ?p))", "(not (occupied ?p))", "(not (slot-free ?s))", "(stored ?w ?s)"),
        )
    if base == "unload":
        return ActionTemplate(
            name,
            (("?m", kind), ("?w", "workpiece"), ("?s", "slot"), ("?p", "position")),
            ("(handover ?m ?p)", "(slot-of ?s ?m)", "(ready ?m)", "(stored ?w ?s)", "(not (occupied ?p))"),
            ("(not (stored ?w ?s))", "(slot-free ?s)", "(at ?w ?p)", "(occupied ?p)"),
        )
    if base == "changeBuckets":
        # only the move-into-an-empty-slot case; swapping two pieces is not needed for planning
        return ActionTemplate(
            name,
            (("?m", kind), ("?w", "workpiece"), ("?from", "slot"), ("?to", "slot")),
            ("(slot-of ?from ?m)", "(slot-of ?to ?m)", "(ready ?m)", "(stored ?w ?from)", "(slot-free ?to)"),
            ("(not (stored ?w ?from))", "(stored ?w ?to)", "(slot-free ?from)", "(not (slot-free ?to))"),
        )
    raise KeyError(f"{kind}.{base} does not affect workpieces")


def templates(catalog: ServiceCatalog) -> list[ActionTemplate]:
    pairs = {
        (catalog.topology.machine(s.provider).kind, s.base_name)
        for s in catalog.services.values()
        if s.base_name in WORKPIECE_BASES
    }
    return sorted((template(k, b) for k, b in pairs), key=lambda t: t.name)


def _typed(params) -> str:
    return " ".join(f"{v} - {t}" for v, t in params)


def export_domain(catalog: ServiceCatalog, topology: Topology | None = None) -> str:
    """Domain text; ``topology`` defaults to the catalog's own."""
    del topology  # object-level facts live in the problem
    lines = [
        f"(define (domain {DOMAIN_NAME})",
        f"  (:requirements {' '.join(REQUIREMENTS)})",
        "  (:types",
        "    color machine position slot workpiece - object",
        f"    {' '.join(sorted(MACHINE_KINDS))} - machine)",
        "  (:predicates",
    ]
    lines += [f"    ({name}{' ' + _typed(p) if p else ''})" for name, p in sorted(PREDICATES.items())]
    lines[-1] += ")"
    for t in templates(catalog):
        lines += [
            f"  (:action {t.name}",
            f"    :parameters ({_typed(t.parameters)})",
            "    :precondition (and",
            *(f"      {lit}" for lit in sorted(t.pre)),
            "    )",
            "    :effect (and",
            *(f"      {lit}" for lit in sorted(t.effect)),
            "    ))",
        ]
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


# -- problem ----------------------------------------------------------------

def slot_object(topology: Topology, warehouse: str, slot: str) -> str:
    floor = topology.machine(warehouse).floor
    return slot if floor == 1 else f"{slot}_f{floor}"


def slot_from_object(topology: Topology, name: str) -> tuple[str, str]:
    for m in topology.machines:
        for s in m.slots:
            if slot_object(topology, m.id, s) == name:
                return m.id, s
    raise KeyError(name)


_CATALOGS: dict[int, ServiceCatalog] = {}


def _catalog_for(topology: Topology) -> ServiceCatalog:
    key = id(topology)
    if key not in _CATALOGS:
        _CATALOGS[key] = generate(topology)
    return _CATALOGS[key]


def static_facts(catalog: ServiceCatalog) -> set[Atom]:
    topo = catalog.topology
    facts: set[Atom] = set()
    for s in catalog.services.values():
        if s.base_name in WORKPIECE_BASES:
            move = movement(topo.machine(s.provider), s.base_name, s.parameters)
            if move:
                facts.add(("route", s.provider, *move))
    for world, machine in topo.owners.items():
        facts.add(("owner", world, machine))
    for m in topo.machines:
        if m.station:
            facts.add(("station", m.id, m.world(m.station)))
        if m.handover:
            facts.add(("handover", m.id, m.world(m.handover)))
        for s in m.slots:
            facts.add(("slot-of", slot_object(topo, m.id, s), m.id))
    return facts


def objects(topology: Topology, state: FactoryState) -> dict[str, str]:
    objs = {c: "color" for c in COLORS}
    objs.update({w: "position" for w in topology.owners})
    for m in topology.machines:
        objs[m.id] = m.kind
        objs.update({slot_object(topology, m.id, s): "slot" for s in m.slots})
    objs.update({w: "workpiece" for w in state.workpieces})
    return objs


def state_facts(state: FactoryState) -> set[Atom]:
    topo = state.topology
    facts: set[Atom] = set()
    for m in topo.machines:
        rt = state.machines[m.id]
        if rt.state == "ready":
            facts.add(("ready", m.id))
        if m.kind == "workstation_transport" and rt.position:
            facts.add(("wt-at", m.world(rt.position)))
        for s in m.slots:
            if state.slot_occupant(m.id, s) is None:
                facts.add(("slot-free", slot_object(topo, m.id, s)))
    for wp in state.workpieces.values():
        facts.add(("has-color", wp.id, wp.color))
        facts.update((flag, wp.id) for flag in wp.flags)
        if wp.position:
            facts.add(("at", wp.id, wp.position))
            facts.add(("occupied", wp.position))
        else:
            facts.add(("stored", wp.id, slot_object(topo, *wp.slot)))
    return facts


def parse_goal(text: str) -> list[Atom]:
    """One atom per line, e.g. ``(burned wp_1)``; ``#`` and ``;`` start comments."""
    atoms = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise PddlSyntaxError(f"goal line is not an atom: {raw!r}")
        words = line[1:-1].split()
        if not words or any("(" in w or ")" in w for w in words):
            raise PddlSyntaxError(f"goal line is not an atom: {raw!r}")
        atoms.append(tuple(w.lower() for w in words))
    return atoms


def _goal_text(goal: list[Atom], objs: dict[str, str]) -> str:
    if not goal:
        raise PddlSyntaxError("goal is empty")
    variables: dict[str, str] = {}
    for atom in goal:
        name, args = atom[0], atom[1:]
        if name not in PREDICATES:
            raise PddlSyntaxError(f"unknown goal predicate {name!r}")
        if len(args) != len(PREDICATES[name]):
            raise PddlSyntaxError(f"arity mismatch in goal atom {atom_text(atom)}")
        for a, (_, typ) in zip(args, PREDICATES[name]):
            if a.startswith("?"):
                if variables.setdefault(a, typ) != typ:
                    raise PddlSyntaxError(f"variable {a} used at two types")
            elif a not in objs:
                raise PddlSyntaxError(f"unknown object {a!r} in goal")
    ground = sorted(atom_text(a) for a in goal if not any(x.startswith("?") for x in a[1:]))
    lifted = sorted(atom_text(a) for a in goal if any(x.startswith("?") for x in a[1:]))
    parts = list(ground)
    if lifted:
        body = lifted[0] if len(lifted) == 1 else f"(and {' '.join(lifted)})"
        parts.append(f"(exists ({_typed(sorted(variables.items()))}) {body})")
    return parts[0] if len(parts) == 1 else "(and " + " ".join(parts) + ")"


def export_problem(state: FactoryState, goal, catalog: ServiceCatalog | None = None, name: str = "task") -> str:
    """Problem text for ``goal`` (atoms or goal-file text) from ``state``."""
    if isinstance(goal, str):
        goal = parse_goal(goal)
    topo = state.topology
    catalog = catalog or _catalog_for(topo)
    objs = objects(topo, state)
    init = sorted(atom_text(a) for a in static_facts(catalog) | state_facts(state))
    by_type: dict[str, list[str]] = {}
    for o, t in objs.items():
        by_type.setdefault(t, []).append(o)
    lines = [f"(define (problem {name})", f"  (:domain {DOMAIN_NAME})", "  (:objects"]
    lines += [f"    {' '.join(sorted(names))} - {t}" for t, names in sorted(by_type.items())]
    lines[-1] += ")"
    lines += ["  (:init", *(f"    {a}" for a in init)]
    lines[-1] += ")"
    lines.append(f"  (:goal {_goal_text(list(goal), objs)}))")
    return "\n".join(lines) + "\n"
