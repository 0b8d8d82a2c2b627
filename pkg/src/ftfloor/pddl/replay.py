"""Map ground plan steps back onto catalog service URLs and execute them."""

from __future__ import annotations

from dataclasses import dataclass

from ..catalog import PROCESSES, ServiceCatalog, movement
from ..engine import Engine, ExecutionRecord
from ..sim import FactoryState
from .compile import WORKPIECE_BASES, action_name, slot_from_object, slot_object


class ReplayError(LookupError):
    pass


@dataclass
class ReplayResult:
    ok: bool
    records: list[ExecutionRecord]
    fails_at: int | None = None

    @property
    def failure(self) -> ExecutionRecord | None:
        return None if self.fails_at is None else self.records[self.fails_at]


def _key(catalog: ServiceCatalog, service) -> tuple | None:
    topo = catalog.topology
    m = topo.machine(service.provider)
    base, params = service.base_name, service.parameters
    name = action_name(m.kind, base)
    move = movement(m, base, params)
    if base == "sort":
        return (name, m.id, params["color"], *move)
    if move is not None:
        return (name, m.id, *move)
    if base in PROCESSES:
        return (name, m.id)
    if base in ("store", "unload") and params["slot"] != "auto":
        return (name, m.id, slot_object(topo, m.id, params["slot"]))
    if base == "changeBuckets":
        return (name, m.id, slot_object(topo, m.id, params["start"]), slot_object(topo, m.id, params["end"]))
    return None


def service_index(catalog: ServiceCatalog) -> dict[tuple, str]:
    """Ground-action key -> URL. Processes map to their first grid value."""
    index: dict[tuple, str] = {}
    for url, service in catalog.services.items():  # catalog order is grid order
        if service.base_name in WORKPIECE_BASES:
            key = _key(catalog, service)
            if key is not None:
                index.setdefault(key, url)
    return index


def step_key(step: str) -> tuple:
    words = step.strip().strip("()").split()
    name, args = words[0], words[1:]
    if name.endswith("_sort"):  # (m w c from to)
        return (name, args[0], args[2], args[3], args[4])
    if name.endswith(("_transport", "_from_to")):  # (m w from to d)
        return (name, args[0], args[2], args[3])
    if name.endswith("_store"):  # (m w p s)
        return (name, args[0], args[3])
    if name.endswith("_unload"):  # (m w s p)
        return (name, args[0], args[2])
    if name.endswith("_change_buckets"):  # (m w from to)
        return (name, args[0], args[2], args[3])
    return (name, args[0])  # processes (m w p)


def plan_urls(plan: list[str], catalog: ServiceCatalog) -> list[str]:
    index = service_index(catalog)
    urls = []
    for step in plan:
        url = index.get(step_key(step))
        if url is None:
            raise ReplayError(f"no service realises {step}")
        urls.append(url)
    return urls


def replay(
    plan: list[str], state: FactoryState, catalog: ServiceCatalog, engine: Engine | None = None
) -> ReplayResult:
    """Execute ``plan`` from ``state``; stops at the first non-ok step."""
    urls = plan_urls(plan, catalog)
    if engine is None:
        engine = Engine(catalog, state)
    else:
        engine.reset(state)
    records = []
    for i, url in enumerate(urls):
        rec = engine.execute(url)
        records.append(rec)
        if rec.outcome != "ok":
            return ReplayResult(False, records, i)
    return ReplayResult(True, records)


__all__ = ["ReplayError", "ReplayResult", "plan_urls", "replay", "service_index", "slot_from_object"]
