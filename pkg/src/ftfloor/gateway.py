"""HTTP face of the service layer.

``Gateway.dispatch`` is the whole routing table and is usable in-process;
``make_server`` wraps it in a threading HTTP server.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlsplit

from . import kb as K
from . import sim
from .catalog import ServiceCatalog, canonical_url
from .engine import Engine, format_timestamp

log = logging.getLogger(__name__)

STATUS = {
    "ok": 200,
    "precondition_violated": 422,
    "postcondition_violated": 500,
    "unknown_service": 404,
    "machine_error": 409,
    "not_applicable": 409,
    "resource_full": 409,
}


def _error(status: int, error_type: str, **extra) -> tuple[int, dict]:
    return status, {"status": "error", "error_type": error_type, **extra}


class HumanTaskBoard:
    """Human tasks a workflow is blocked on; each completes at most once."""

    def __init__(self):
        self._tasks: dict[str, dict] = {}
        self._cond = threading.Condition()

    def open(self, task_id: str, label: str, now: str) -> tuple[int, dict]:
        with self._cond:
            task = self._tasks.get(task_id)
            # a completed task id may be reused by a later workflow run
            if task is None or task["state"] == "completed":
                task = {"task_id": task_id, "name": label, "state": "waiting", "opened_at": now}
                self._tasks[task_id] = task
            return 200, dict(task)

    def complete(self, task_id: str, now: str) -> tuple[int, dict]:
        with self._cond:
            task = self._tasks.get(task_id)
            if task is None:
                return _error(404, "unknown_task", task_id=task_id)
            if task["state"] == "completed":
                return _error(409, "task_completed", task_id=task_id)
            task["state"] = "completed"
            task["completed_at"] = now
            self._cond.notify_all()
            return 200, dict(task)

    def get(self, task_id: str) -> dict | None:
        with self._cond:
            task = self._tasks.get(task_id)
            return dict(task) if task else None

    def waiting(self) -> list[str]:
        with self._cond:
            return sorted(t for t, v in self._tasks.items() if v["state"] == "waiting")

    def wait(self, task_id: str, timeout: float | None = None) -> dict:
        with self._cond:
            if not self._cond.wait_for(lambda: self._tasks[task_id]["state"] == "completed", timeout):
                raise TimeoutError(f"human task {task_id} not completed")
            return dict(self._tasks[task_id])


class Gateway:
    def __init__(self, catalog: ServiceCatalog, engine: Engine, kb: K.KnowledgeBase | None = None, scenario=(), faults=()):
        self.catalog = catalog
        self.engine = engine
        self.kb = kb
        self.scenario = list(scenario)
        self.faults = list(faults)
        self.tasks = HumanTaskBoard()

    def _kb(self) -> K.KnowledgeBase:
        if self.kb is None:
            from .catalog import load_catalog_kb

            self.kb = load_catalog_kb(self.catalog)
        return self.kb

    def now(self) -> str:
        return format_timestamp(self.engine.now())

    def dispatch(self, method: str, path: str, query=None) -> tuple[int, object]:
        method = method.upper()
        if query is None:
            parts = urlsplit(path)
            path, query = parts.path, parts.query
        params = dict(parse_qsl(query, keep_blank_values=True)) if isinstance(query, str) else dict(query)
        segments = [s for s in path.split("/") if s]
        try:
            if segments[:1] == ["admin"]:
                return self._admin(method, segments[1:], params)
            if segments[:1] == ["tasks"]:
                return self._tasks(method, segments[1:], params)
            if segments == ["catalog"] and method == "GET":
                return 200, {"services": sorted(self.catalog.services)}
            if segments == ["kb", "conditions"] and method == "GET":
                return self._conditions(params)
            if segments == ["rfid", "read"] and method == "GET":
                return self._rfid(params)
            return self._service(method, path, params)
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("dispatch failed")
            return _error(500, "internal_error", detail=str(exc))

    def _service(self, method, path, params):
        query = "&".join(f"{k}={v}" for k, v in params.items())
        url = f"http://{self.catalog.topology.host}{path}" + (f"?{query}" if query else "")
        canon, _ = canonical_url(self.catalog, url)
        if canon is None or canon not in self.catalog.services:
            return _error(404, "unknown_service")
        if method != "GET":
            return _error(405, "method_not_allowed")
        record = self.engine.execute(url)
        return STATUS[record.outcome], dict(record.response)

    def _conditions(self, params):
        role = params.get("role", "pre")
        if role not in ("pre", "post") or "service" not in params:
            return _error(400, "bad_request")
        service = self.catalog.services.get(canonical_url(self.catalog, params["service"])[0] or "")
        url = service.url if service else params["service"]
        return 200, [
            {
                "condition": b.condition.local,
                "checker_url": b.checker_url,
                "required_key": b.required_key,
                "required_value": b.required_value,
            }
            for b in K.conditions_of(self._kb(), url, role)
        ]

    def _rfid(self, params):
        station = params.get("station")
        topo = self.catalog.topology
        if station not in topo.owners:
            return _error(404, "unknown_sensor")
        with self.engine._cond:
            return 200, sim.read_sensor(self.engine.state, topo.owner(station), "read_rfid", station)

    def _admin(self, method, rest, params):
        if rest == ["fault"] and method == "POST":
            machine, mode = params.get("machine"), params.get("mode")
            if not self.catalog.topology.has_machine(machine or ""):
                return _error(404, "unknown_resource")
            if mode not in ("on", "off"):
                return _error(400, "bad_request")
            self.engine.inject_fault(machine, mode)
            return 200, {"status": "ok", "machine": machine, "state": self.engine.state.machines[machine].state}
        if rest == ["reset"] and method == "POST":
            fresh = sim.initial_state(self.catalog.topology, self.scenario, self.faults)
            try:
                self.engine.reset(fresh)
            except RuntimeError:
                return _error(409, "busy")
            return 200, {"status": "ok"}
        if rest == ["state"] and method in ("GET", "POST"):
            return 200, json.loads(self.engine.snapshot())
        if rest == ["clock"] and method == "GET":
            return 200, {"now": self.now()}
        if rest == ["unavailable"] and method == "GET":
            faulted = sorted(m for m, rt in self.engine.state.machines.items() if rt.state == "error")
            return 200, {"faulted": faulted, "services": K.unavailable_services(self._kb(), faulted)}
        return _error(404, "unknown_endpoint")

    def _tasks(self, method, rest, params):
        if not rest and method == "GET":
            return 200, {"waiting": self.tasks.waiting()}
        if len(rest) == 1 and method == "GET":
            task = self.tasks.get(rest[0])
            return (200, task) if task else _error(404, "unknown_task")
        if len(rest) == 2 and method == "POST":
            task_id, action = rest
            if action == "open":
                return self.tasks.open(task_id, params.get("label", task_id), self.now())
            if action == "complete":
                return self.tasks.complete(task_id, self.now())
        return _error(404, "unknown_endpoint")


class _Handler(BaseHTTPRequestHandler):
    gateway: Gateway
    protocol_version = "HTTP/1.1"

    def _respond(self, method):
        status, doc = self.gateway.dispatch(method, self.path)
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self._respond("GET")

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            self.rfile.read(length)
        self._respond("POST")

    def log_message(self, fmt, *args):
        log.info("%s %s", self.address_string(), fmt % args)


def make_server(gateway: Gateway, host: str = "127.0.0.1", port: int = 5000) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"gateway": gateway})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server
