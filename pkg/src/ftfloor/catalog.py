"""Parameterized service catalog generated from the shop-floor topology.

Every base service of every machine is expanded over its parameter grid.
Each expansion gets a URL, pre/postconditions from a fixed rule set, the
set of machines it must lock, and a nominal duration.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from urllib.parse import parse_qsl, urlsplit

from . import kb as K
from .kb import ConditionBinding, Iri, Literal, Triple
from .topology import COLORS, SERVICE_COUNTS, MachineSpec, Topology, TopologyError

SENSING = {
    "getMotorSpeed",
    "capacitiveSensor",
    "statusOfLightBarrier",
    "stateOfMachine",
    "checkPosition",
    "getAmountOfStoredWorkpieces",
}
TRANSPORTS = {"pickUpAndTransport", "transportFromTo", "moveFromTo"}
PROCESSES = {"burn": "burned", "mill": "milled", "drill": "drilled", "punch": "punched"}
# query parameters accepted as inputs rather than grid coordinates
INPUTS = {"setMotorSpeed": {"speed"}}

DURATION_CATEGORY = {
    "pickUpAndTransport": "transport",
    "transportFromTo": "transport",
    "moveFromTo": "transport",
    "moveTo": "transport",
    "sort": "transport",
    "burn": "process",
    "mill": "process",
    "drill": "process",
    "punch": "process",
    "store": "storage",
    "unload": "storage",
    "changeBuckets": "storage",
    "calibrate": "calibrate",
    "setMotorSpeed": "adjust",
    "resetAllMotors": "adjust",
}


def snake_case(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def camel_title(name: str) -> str:
    return name[0].upper() + name[1:]


def title(value: str) -> str:
    return "_".join(part[:1].upper() + part[1:] for part in value.split("_"))


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class BaseService:
    name: str
    machine_kind: str
    grid: tuple[tuple[str, tuple[str, ...]], ...]

    @property
    def cardinality(self) -> int:
        n = 1
        for _, values in self.grid:
            n *= len(values)
        return n


@dataclass
class ServiceDescription:
    iri: Iri
    base_name: str
    provider: str
    kind: str  # "actuation" | "sensing"
    parameters: dict[str, str]
    url: str
    preconditions: list[ConditionBinding] = field(default_factory=list)
    postconditions: list[ConditionBinding] = field(default_factory=list)
    required_resources: frozenset[str] = frozenset()
    nominal_duration: float = 0.0
    class_iri: Iri | None = None

    @property
    def snake_name(self) -> str:
        return snake_case(self.base_name)

    @property
    def path(self) -> str:
        return urlsplit(self.url).path


@dataclass
class ServiceCatalog:
    topology: Topology
    services: dict[str, ServiceDescription]
    base_services: list[BaseService]

    def __len__(self):
        return len(self.services)

    def __iter__(self):
        return iter(self.services.values())

    def counts(self) -> dict[str, dict[str, int]]:
        """Expansion count per machine kind and base service."""
        out: dict[str, dict[str, int]] = {}
        for b in self.base_services:
            out.setdefault(b.machine_kind, {})[b.name] = 0
        seen_machines = {}
        for s in self.services.values():
            kind = self.topology.machine(s.provider).kind
            # floors duplicate machines; count the first floor only
            first = seen_machines.setdefault(kind, s.provider)
            if s.provider == first:
                out[kind][s.base_name] += 1
        return out

    def by_base(self, machine_id: str, base_name: str) -> list[ServiceDescription]:
        return [s for s in self.services.values() if s.provider == machine_id and s.base_name == base_name]


# -- grids ------------------------------------------------------------------

def _grid(m: MachineSpec, base: str) -> tuple[tuple[str, tuple[str, ...]], ...]:
    machine = ("machine", (m.id,))
    locals_ = tuple(m.positions)
    if base == "calibrate":
        return (machine, ("reference", m.references)) if m.references else (machine,)
    if base in ("burn", "drill", "punch"):
        return (machine, ("duration", ("standard", "extended")))
    if base == "mill":
        return (machine, ("program", ("p1", "p2", "p3", "p4")))
    if base == "transportFromTo" and m.routes:
        return (machine, ("route", tuple(m.routes)))
    if base in ("transportFromTo", "moveFromTo", "pickUpAndTransport"):
        # ordered distinct pairs, expanded below
        return (machine, ("start", locals_), ("end", locals_))
    if base in ("getMotorSpeed", "setMotorSpeed"):
        return (machine, ("motor", m.motors))
    if base in ("resetAllMotors", "stateOfMachine", "getAmountOfStoredWorkpieces"):
        return (machine,)
    if base == "capacitiveSensor":
        return (machine, ("position", tuple(m.local(w) for _, w in sorted(m.capacitive_sensors.items()))))
    if base == "statusOfLightBarrier":
        return (machine, ("lb", tuple(str(p) for p in sorted(m.light_barriers))))
    if base == "changeBuckets":
        return (machine, ("start", m.slots), ("end", m.slots))
    if base in ("store", "unload"):
        return (machine, ("slot", m.slots + ("auto",)))
    if base == "sort":
        return (machine, ("color", COLORS), ("ejection", m.ejections))
    if base in ("moveTo", "checkPosition"):
        return (machine, ("position", locals_))
    raise CatalogError(f"no parameter grid for {m.kind}.{base}")


def _expand(base: str, grid) -> list[dict[str, str]]:
    names = [n for n, _ in grid]
    combos = [dict(zip(names, values)) for values in itertools.product(*(v for _, v in grid))]
    if base in ("transportFromTo", "moveFromTo", "pickUpAndTransport") and "start" in names:
        combos = [c for c in combos if c["start"] != c["end"]]
    return combos


def _base_services(m: MachineSpec) -> list[BaseService]:
    out = []
    for base in SERVICE_COUNTS[m.kind]:
        grid = _grid(m, base)
        bs = BaseService(base, m.kind, grid)
        n = len(_expand(base, grid))
        expected = SERVICE_COUNTS[m.kind][base]
        if n != expected:
            raise TopologyError(f"{m.id}: {base} expands to {n}, table cell requires {expected}")
        out.append(bs)
    return out


# -- naming -----------------------------------------------------------------

def service_url(host: str, prefix: str, base_name: str, parameters: dict[str, str], grid_names=None) -> str:
    if grid_names is not None:
        extra = [k for k in parameters if k not in grid_names]
        if extra:
            raise CatalogError(f"parameters not in grid: {', '.join(extra)}")
        parameters = {k: parameters[k] for k in grid_names if k in parameters}
    query = "&".join(f"{k}={v}" for k, v in parameters.items())
    url = f"http://{host}/{prefix}/{snake_case(base_name)}"
    return f"{url}?{query}" if query else url


def service_iri(m: MachineSpec, base: str, params: dict[str, str]) -> Iri:
    parts = ["Service", m.url_prefix.upper(), title(snake_case(base))]
    for k, v in params.items():
        parts.append(m.label if k == "machine" else f"{title(k)}_{title(v)}")
    return Iri("_".join(parts))


def class_iri(m: MachineSpec, base: str) -> Iri:
    return Iri(f"Service{m.url_prefix.upper()}{camel_title(base)}")


def description_iri(m: MachineSpec, base: str) -> Iri:
    return Iri(f"Service_Description_{m.url_prefix.upper()}_{title(snake_case(base))}")


# -- condition rules ------------------------------------------------------

class _Conditions:
    """Builds condition bindings whose checker is the matching sensing service."""

    def __init__(self, topo: Topology):
        self.topo = topo

    def _url(self, machine_id, base, **params):
        m = self.topo.machine(machine_id)
        return service_url(self.topo.host, m.url_prefix, base, {"machine": m.id, **params})

    def ready(self, machine_id, role="Precondition"):
        m = self.topo.machine(machine_id)
        return ConditionBinding(
            Iri(f"{role}_{m.label}_State_Of_Machine_Ready"),
            self._url(machine_id, "stateOfMachine"),
            "state",
            "ready",
        )

    def occupancy(self, world: str, value: bool, role="Precondition"):
        sensor = self.topo.sensor_at(world)
        if sensor is None:
            return None
        m = self.topo.machine(sensor.machine)
        flag = "True" if value else "False"
        if sensor.kind == "light_barrier":
            return ConditionBinding(
                Iri(f"{role}_{m.label}_Status_Of_Light_Barrier_{sensor.pin}_Interrupted_{flag}"),
                self._url(m.id, "statusOfLightBarrier", lb=str(sensor.pin)),
                "interrupted",
                flag.lower(),
            )
        return ConditionBinding(
            Iri(f"{role}_{m.label}_Capacitive_Sensor_{sensor.pin}_Detected_{flag}"),
            self._url(m.id, "capacitiveSensor", position=m.local(world)),
            "detected",
            flag.lower(),
        )

    def wt_position(self, wt: MachineSpec, local: str, value: bool):
        flag = "True" if value else "False"
        return ConditionBinding(
            Iri(f"Precondition_{wt.label}_Check_Position_{title(local)}_{flag}"),
            self._url(wt.id, "checkPosition", position=local),
            "at_position",
            flag.lower(),
        )


def movement(m: MachineSpec, base: str, params: dict[str, str]) -> tuple[str, str] | None:
    """World (from, to) positions a workpiece-moving service relocates between."""
    if base in TRANSPORTS:
        if "route" in params:
            frm, to = m.routes[params["route"]]
        else:
            frm, to = params["start"], params["end"]
        return m.world(frm), m.world(to)
    if base == "sort":
        return m.world(m.entry), m.world(params["ejection"])
    return None


def _attach(topo: Topology, conds: _Conditions, m: MachineSpec, base: str, params: dict[str, str]):
    pre, post = [], []
    resources = {m.id}
    if base in SENSING:
        return pre, post, resources
    pre.append(conds.ready(m.id))  # provider ready
    move = movement(m, base, params)
    if move is not None:
        frm, to = move
        dest = topo.owner(to)
        resources |= {topo.owner(frm), dest}
        if dest != m.id:
            pre.append(conds.ready(dest))  # receiving machine ready
        pre.append(conds.occupancy(frm, True))  # piece at source
        pre.append(conds.occupancy(to, False))  # target free
        post.append(conds.occupancy(to, True, role="Postcondition"))  # piece arrived
        if m.kind != "workstation_transport":  # WT must not sit at the drop-off
            for wt in topo.machines:
                if wt.kind == "workstation_transport" and wt.local(to) == "oven":
                    pre.append(conds.wt_position(wt, "oven", False))
    elif base in PROCESSES:  # piece at the station
        here = m.world(m.station)
        pre.append(conds.occupancy(here, True))
        post.append(conds.occupancy(here, True, role="Postcondition"))
    elif base in ("store", "unload"):  # handover tray as slot proxy
        tray = m.world(m.handover)
        loading = base == "store"
        pre.append(conds.occupancy(tray, loading))
        post.append(conds.occupancy(tray, not loading, role="Postcondition"))
    pre = sorted({c for c in pre if c is not None}, key=lambda c: str(c.condition))
    post = sorted({c for c in post if c is not None}, key=lambda c: str(c.condition))
    return pre, post, resources


def generate(topo: Topology) -> ServiceCatalog:
    topo.validate()
    conds = _Conditions(topo)
    services: dict[str, ServiceDescription] = {}
    bases: list[BaseService] = []
    seen_kinds = set()
    for m in topo.machines:
        m_bases = _base_services(m)
        if m.kind not in seen_kinds:
            bases += m_bases
            seen_kinds.add(m.kind)
        for b in m_bases:
            kind = "sensing" if b.name in SENSING else "actuation"
            duration = topo.durations["sensing" if kind == "sensing" else DURATION_CATEGORY[b.name]]
            for params in _expand(b.name, b.grid):
                url = service_url(topo.host, m.url_prefix, b.name, params)
                if url in services:
                    raise CatalogError(f"duplicate service URL {url}")
                pre, post, resources = _attach(topo, conds, m, b.name, params)
                services[url] = ServiceDescription(
                    iri=service_iri(m, b.name, params),
                    base_name=b.name,
                    provider=m.id,
                    kind=kind,
                    parameters=params,
                    url=url,
                    preconditions=pre,
                    postconditions=post,
                    required_resources=frozenset(resources),
                    nominal_duration=duration,
                    class_iri=class_iri(m, b.name),
                )
    return ServiceCatalog(topo, services, bases)


# -- lookup -----------------------------------------------------------------

def canonical_url(catalog: ServiceCatalog, url: str) -> tuple[str | None, dict[str, str]]:
    """Reorder query parameters into grid order; returns (url, extra inputs)."""
    parts = urlsplit(url)
    segments = parts.path.strip("/").split("/")
    if len(segments) != 2:
        return None, {}
    prefix, name = segments
    query = dict(parse_qsl(parts.query, keep_blank_values=True))
    machine_id = query.get("machine")
    if machine_id is None or not catalog.topology.has_machine(machine_id):
        return None, {}
    m = catalog.topology.machine(machine_id)
    if m.url_prefix != prefix:
        return None, {}
    base = next((b for b in SERVICE_COUNTS[m.kind] if snake_case(b) == name), None)
    if base is None:
        return None, {}
    names = [n for n, _ in _grid(m, base)]
    allowed_inputs = INPUTS.get(base, set())
    if any(k not in names and k not in allowed_inputs for k in query):
        return None, {}
    if any(k not in query for k in names):
        return None, {}
    inputs = {k: v for k, v in query.items() if k in allowed_inputs}
    host = parts.netloc or catalog.topology.host
    return service_url(host, prefix, base, {k: query[k] for k in names}), inputs


def lookup(catalog: ServiceCatalog, url: str) -> ServiceDescription | None:
    canon, _ = canonical_url(catalog, url)
    return catalog.services.get(canon) if canon else None


# -- triples ----------------------------------------------------------------

MACHINE_CLASSES = {
    "drilling_machine": "DrillingMachine",
    "high_bay_warehouse": "HighBayWarehouse",
    "milling_machine": "MillingMachine",
    "oven": "Oven",
    "punching_machine": "PunchingMachine",
    "sorting_machine": "SortingMachine",
    "vacuum_gripper_robot": "VacuumGripperRobot",
    "workstation_transport": "WorkstationTransport",
}


def topology_triples(topo: Topology) -> list[Triple]:
    out = []
    for kind, cls in MACHINE_CLASSES.items():
        out.append(Triple(Iri(cls), K.SUBCLASS, Iri("Machine")))
    out.append(Triple(Iri("Machine"), K.SUBCLASS, Iri("Resource")))
    out.append(Triple(Iri("Motor"), K.SUBCLASS, Iri("Actuator")))
    for m in topo.machines:
        machine = Iri(m.id)
        out.append(Triple(machine, K.TYPE, Iri(MACHINE_CLASSES[m.kind])))
        for motor in m.motors:
            motor_iri = Iri(f"motor_{m.id}_{motor}")
            out.append(Triple(motor_iri, K.TYPE, Iri("Motor")))
            out.append(Triple(motor_iri, K.ACTUATES, machine))
    return out


def as_triples(catalog: ServiceCatalog) -> list[Triple]:
    topo = catalog.topology
    out = topology_triples(topo)
    out.append(Triple(K.ACTUATION_CLASS, K.SUBCLASS, K.SERVICE_CLASS))
    out.append(Triple(K.SENSING_CLASS, K.SUBCLASS, K.SERVICE_CLASS))
    for s in catalog.services.values():
        m = topo.machine(s.provider)
        machine_class = Iri(f"Service{m.url_prefix.upper()}")
        out.append(Triple(machine_class, K.SUBCLASS, K.SERVICE_CLASS))
        out.append(Triple(s.class_iri, K.SUBCLASS, machine_class))
        out.append(Triple(s.class_iri, K.SUBCLASS, K.ACTUATION_CLASS if s.kind == "actuation" else K.SENSING_CLASS))
        out.append(Triple(s.iri, K.TYPE, s.class_iri))
        out.append(Triple(s.iri, K.HAS_DESCRIPTION, description_iri(m, s.base_name)))
        for link, conds in ((K.HAS_PRECONDITION, s.preconditions), (K.HAS_POSTCONDITION, s.postconditions)):
            for c in conds:
                checker = catalog.services[c.checker_url]
                out.append(Triple(s.iri, link, c.condition))
                out.append(Triple(c.condition, K.IS_CHECKED_BY, checker.iri))
                out.append(Triple(c.condition, K.REQUIRED_KEY, Literal(c.required_key)))
                out.append(Triple(c.condition, K.REQUIRED_VALUE, Literal(c.required_value)))
        out.append(Triple(s.iri, K.HAS_URL, Literal(s.url)))
    return sorted(set(out), key=lambda t: (str(t.subject), str(t.predicate), str(t.object)))


def load_catalog_kb(catalog: ServiceCatalog) -> K.KnowledgeBase:
    return K.KnowledgeBase(as_triples(catalog))


def counts_table(catalog: ServiceCatalog) -> str:
    """Per-machine table of base services and their expansion counts."""
    from .topology import KIND_TITLES, REFERENCE_TOTAL

    counts = catalog.counts()
    lines = []
    for kind, cells in counts.items():
        lines.append(KIND_TITLES[kind])
        for base, n in cells.items():
            lines.append(f"  {base} ({n})")
    first_floor = sum(sum(c.values()) for c in counts.values())
    lines.append(f"base: {len(catalog.base_services)}, total: {first_floor}")
    if first_floor != REFERENCE_TOTAL:
        lines.append(f"note: reference aggregate is {REFERENCE_TOTAL}; per-cell sum differs by {first_floor - REFERENCE_TOTAL}")
    if len(catalog) != first_floor:
        lines.append(f"all floors: {len(catalog)}")
    return "\n".join(lines) + "\n"
