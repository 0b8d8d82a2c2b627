"""Execution core: FIFO scheduling under per-machine mutual exclusion.

Actuation requests wait in one global FIFO queue. A scan over that queue
starts every request whose full resource set is free; resources are taken
all at once by the scheduler, so there is no hold-and-wait. A request may
overtake earlier ones only if their resource sets are disjoint. Sensing
requests sit in their own queue and never look at the locks.

Two clock modes:

* ``sim``: a logical clock; callers drive it with ``run_step``.
* ``real``: a worker thread runs the loop against the wall clock, with
  simulated seconds scaled by ``time_scale`` (10 ms by default).
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Callable

from . import sim
from .catalog import ServiceCatalog, ServiceDescription, canonical_url
from .kb import ConditionBinding

log = logging.getLogger(__name__)

OUTCOMES = (
    "ok",
    "precondition_violated",
    "postcondition_violated",
    "unknown_service",
    "machine_error",
    "not_applicable",
    "resource_full",
)

PENDING = "pending"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def format_timestamp(seconds: float) -> str:
    t = _EPOCH + timedelta(milliseconds=round(seconds * 1000))
    return t.strftime("%Y-%m-%dT%H:%M:%S.") + f"{t.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> float:
    t = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
    return (t - _EPOCH).total_seconds()


class UnknownTicket(KeyError):
    pass


@dataclass
class Request:
    ticket: int
    service_url: str
    submitted_at: float
    kind: str
    service: ServiceDescription | None = None
    inputs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExecutionRecord:
    ticket: int
    service_url: str
    outcome: str
    start_time: float
    end_time: float
    failed_condition: str | None = None
    response: dict = field(default_factory=dict)

    def trace_line(self) -> str:
        return "\t".join(
            [
                str(self.ticket),
                self.service_url,
                self.outcome,
                format_timestamp(self.start_time),
                format_timestamp(self.end_time),
                self.failed_condition or "-",
            ]
        )


@dataclass
class _InFlight:
    request: Request
    start: float
    end: float


Dispatch = Callable[[str], dict]


def evaluate_conditions(bindings: list[ConditionBinding], dispatch: Dispatch) -> dict:
    """Check bindings in order against live checker responses; first failure wins."""
    for b in bindings:
        try:
            response = dispatch(b.checker_url)
        except Exception:  # checker unreachable or broken
            return {"result": "fail", "condition": b.condition, "observed": "unreachable"}
        observed = response.get(b.required_key)
        if observed is None or str(observed).lower() != b.required_value.lower():
            return {
                "result": "fail",
                "condition": b.condition,
                "observed": "missing" if observed is None else str(observed),
            }
    return {"result": "pass"}


class Engine:
    def __init__(
        self,
        catalog: ServiceCatalog,
        state: sim.FactoryState,
        clock: str = "sim",
        time_scale: float = 0.01,
        dispatch: Dispatch | None = None,
    ):
        if clock not in ("sim", "real"):
            raise ValueError("clock must be 'sim' or 'real'")
        self.catalog = catalog
        self.state = state
        self.clock_mode = clock
        self.time_scale = time_scale
        self._dispatch = dispatch or self.read_checker
        self._cond = threading.Condition(threading.RLock())
        self._tickets = itertools.count(1)
        self._actuation: deque[Request] = deque()
        self._sensing: deque[Request] = deque()
        self._locks: dict[str, int] = {}
        self._in_flight: dict[int, _InFlight] = {}
        self._records: dict[int, ExecutionRecord] = {}
        self._issued: set[int] = set()
        self.trace: list[ExecutionRecord] = []
        self._now = state.clock
        self._wall0 = time.time()
        self._worker: threading.Thread | None = None
        self._running = False

    # -- time ----------------------------------------------------------

    def now(self) -> float:
        if self.clock_mode == "real":
            return time.time()
        return self._now

    def _scaled(self, duration: float) -> float:
        return duration * self.time_scale if self.clock_mode == "real" else duration

    # -- client API ----------------------------------------------------

    def submit(self, service_url: str) -> int:
        canon, inputs = canonical_url(self.catalog, service_url)
        service = self.catalog.services.get(canon) if canon else None
        with self._cond:
            ticket = next(self._tickets)
            self._issued.add(ticket)
            kind = service.kind if service else "sensing"
            req = Request(ticket, service_url, self.now(), kind, service, inputs)
            (self._actuation if kind == "actuation" else self._sensing).append(req)
            self._cond.notify_all()
        return ticket

    def poll(self, ticket: int):
        with self._cond:
            if ticket not in self._issued:
                raise UnknownTicket(f"unknown_ticket: {ticket}")
            return self._records.get(ticket, PENDING)

    def wait(self, ticket: int, timeout: float | None = None) -> ExecutionRecord:
        """Block until ``ticket`` has a record. In sim mode this drives the clock."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            if ticket not in self._issued:
                raise UnknownTicket(f"unknown_ticket: {ticket}")
            while ticket not in self._records:
                if self.clock_mode == "sim":
                    if any(r.ticket == ticket for r in self._sensing):
                        self._drain_sensing()
                        continue
                    if not self.run_step():
                        if not self._in_flight and not self._actuation and not self._sensing:
                            raise RuntimeError(f"ticket {ticket} can never complete")
                else:
                    remaining = None if deadline is None else deadline - time.monotonic()
                    if remaining is not None and remaining <= 0:
                        raise TimeoutError(f"ticket {ticket} still pending")
                    self._cond.wait(remaining)
            return self._records[ticket]

    def execute(self, service_url: str, timeout: float | None = None) -> ExecutionRecord:
        return self.wait(self.submit(service_url), timeout)

    def inject_fault(self, machine: str, mode: str) -> None:
        with self._cond:
            self.state = sim.inject_fault(self.state, machine, mode)

    def reset(self, state: sim.FactoryState) -> None:
        with self._cond:
            if self._in_flight or self._actuation:
                raise RuntimeError("cannot reset while requests are pending")
            self.state = state
            self._now = state.clock

    def snapshot(self) -> str:
        with self._cond:
            return self.state.snapshot()

    def pending(self) -> int:
        with self._cond:
            return len(self._actuation) + len(self._sensing) + len(self._in_flight)

    def read_checker(self, url: str) -> dict:
        """In-process route from a checker URL to the twin's sensors."""
        canon, _ = canonical_url(self.catalog, url)
        service = self.catalog.services.get(canon) if canon else None
        if service is None or service.kind != "sensing":
            raise LookupError(f"not a sensing service: {url}")
        return sim.read_service(self.state, service)

    # -- scheduler -----------------------------------------------------

    def _emit(self, record: ExecutionRecord) -> None:
        self._records[record.ticket] = record
        self.trace.append(record)
        log.debug("record %s", record.trace_line())
        self._cond.notify_all()

    def _fail(self, req: Request, outcome: str, at: float, condition=None, observed=None, end=None):
        end = at if end is None else end
        response = {
            "status": "error",
            "error_type": outcome,
            "start_time": format_timestamp(at),
            "end_time": format_timestamp(end),
        }
        if condition is not None:
            response["failed_condition"] = condition.local
            response["observed"] = observed
        self._emit(
            ExecutionRecord(
                req.ticket,
                req.service_url,
                outcome,
                at,
                end,
                condition.local if condition is not None else None,
                response,
            )
        )

    def _drain_sensing(self) -> int:
        n = 0
        sensing_time = self.catalog.topology.durations["sensing"]
        while self._sensing:
            req = self._sensing.popleft()
            start = self.now()
            if req.service is None:
                self._fail(req, "unknown_service", start)
            else:
                reading = sim.read_service(self.state, req.service)
                if self.clock_mode == "sim":
                    self._now = start + sensing_time
                end = self.now()
                self._emit(ExecutionRecord(req.ticket, req.service_url, "ok", start, end, None, reading))
            n += 1
        return n

    def _start_eligible(self) -> int:
        n = 0
        blocked: set[str] = set()
        waiting: deque[Request] = deque()
        while self._actuation:
            req = self._actuation.popleft()
            need = req.service.required_resources
            if need & blocked or any(r in self._locks for r in need):
                blocked |= need
                waiting.append(req)
                continue
            now = self.now()
            check = evaluate_conditions(req.service.preconditions, self._dispatch)
            if check["result"] == "fail":
                self._fail(req, "precondition_violated", now, check["condition"], check["observed"])
                n += 1
                continue
            try:
                result = sim.apply(self.state, req.service, req.inputs)
            except sim.SimError as exc:
                self._fail(req, exc.error_type, now)
                n += 1
                continue
            for r in need:
                self._locks[r] = req.ticket
            self.state = self.state.with_machine(req.service.provider, state="busy")
            end = now + self._scaled(result.duration)
            self._in_flight[req.ticket] = _InFlight(req, now, end)
        self._actuation = waiting
        return n

    def _complete(self, job: _InFlight) -> None:
        req = job.request
        del self._in_flight[req.ticket]
        provider = req.service.provider
        if self.state.machines[provider].state == "busy":
            self.state = self.state.with_machine(provider, state="ready")
        try:
            result = sim.apply(self.state, req.service, req.inputs)
        except sim.SimError as exc:
            self._fail(req, exc.error_type, job.start, end=job.end)
        else:
            self.state = replace(result.new_state, clock=job.end if self.clock_mode == "sim" else self.state.clock)
            check = evaluate_conditions(req.service.postconditions, self._dispatch)
            if check["result"] == "fail":
                self._fail(req, "postcondition_violated", job.start, check["condition"], check["observed"], end=job.end)
            else:
                self._emit(
                    ExecutionRecord(
                        req.ticket,
                        req.service_url,
                        "ok",
                        job.start,
                        job.end,
                        None,
                        {
                            "status": "ok",
                            "start_time": format_timestamp(job.start),
                            "end_time": format_timestamp(job.end),
                        },
                    )
                )
        for r in req.service.required_resources:
            if self._locks.get(r) == req.ticket:
                del self._locks[r]

    def _complete_due(self) -> int:
        now = self.now()
        due = sorted((j for j in self._in_flight.values() if j.end <= now), key=lambda j: (j.end, j.request.ticket))
        for job in due:
            self._complete(job)
        return len(due)

    def run_step(self, horizon: float | None = None) -> int:
        """One scheduler pass; returns the number of records produced.

        Completes due actuations, serves all sensing requests, starts every
        eligible actuation, then (sim mode) advances the clock to the next
        completion, or up to ``horizon`` if one is given.
        """
        with self._cond:
            n = self._complete_due()
            n += self._drain_sensing()
            n += self._start_eligible()
            if self.clock_mode == "sim":
                if self._in_flight:
                    nxt = min(j.end for j in self._in_flight.values())
                    if horizon is None or nxt <= horizon:
                        self._now = max(self._now, nxt)
                        n += self._complete_due()
                    else:
                        self._now = max(self._now, horizon)
                elif horizon is not None:
                    self._now = max(self._now, horizon)
                if self.state.clock != self._now:
                    self.state = replace(self.state, clock=self._now)
            return n

    def run_until_idle(self, max_steps: int = 1_000_000) -> int:
        total = 0
        for _ in range(max_steps):
            with self._cond:
                idle = not (self._actuation or self._sensing or self._in_flight)
            if idle:
                return total
            produced = self.run_step()
            total += produced
        raise RuntimeError("engine did not reach idle")

    # -- real-time worker ---------------------------------------------

    def start(self) -> None:
        if self.clock_mode != "real":
            raise RuntimeError("worker thread only runs in real-time mode")
        if self._worker is not None:
            return
        self._running = True
        self._worker = threading.Thread(target=self._loop, name="ftfloor-engine", daemon=True)
        self._worker.start()

    def stop(self) -> None:
        with self._cond:
            self._running = False
            self._cond.notify_all()
        if self._worker is not None:
            self._worker.join(timeout=5)
            self._worker = None

    def _loop(self) -> None:
        with self._cond:
            while self._running:
                self._complete_due()
                self._drain_sensing()
                self._start_eligible()
                if self._in_flight:
                    timeout = max(0.0, min(j.end for j in self._in_flight.values()) - self.now())
                else:
                    timeout = None
                if not self._sensing:
                    self._cond.wait(timeout)
