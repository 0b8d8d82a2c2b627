"""Sequential cyber-physical workflows of service tasks and human tasks.

File format, one step per line (``#`` starts a comment)::

    workflow burn_and_store
    service http://127.0.0.1:5000/ov/burn?machine=ov_1&duration=standard
    human quality_inspection "Quality inspection"
"""

from __future__ import annotations

import json
import shlex
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from importlib import resources
from urllib.parse import quote, urlsplit


class WorkflowSyntaxError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class EndpointUnreachable(ConnectionError):
    pass


@dataclass(frozen=True)
class ServiceStep:
    service_url: str


@dataclass(frozen=True)
class HumanTask:
    task_id: str
    label: str


@dataclass
class WorkflowDefinition:
    name: str
    steps: list


@dataclass
class TraceEntry:
    index: int
    kind: str
    target: str
    outcome: str
    start_time: str | None
    end_time: str | None
    failed_condition: str | None = None


@dataclass
class WorkflowTrace:
    name: str
    entries: list[TraceEntry] = field(default_factory=list)
    status: str = "completed"

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e), sort_keys=True) + "\n" for e in self.entries)


def parse_workflow(text: str, name: str = "workflow") -> WorkflowDefinition:
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            words = shlex.split(line)
        except ValueError as exc:
            raise WorkflowSyntaxError(lineno, str(exc)) from None
        keyword, args = words[0], words[1:]
        if keyword == "workflow" and len(args) == 1 and not steps:
            name = args[0]
        elif keyword == "service" and len(args) == 1:
            if not urlsplit(args[0]).path:
                raise WorkflowSyntaxError(lineno, f"not a service URL: {args[0]!r}")
            steps.append(ServiceStep(args[0]))
        elif keyword == "human" and len(args) in (1, 2):
            steps.append(HumanTask(args[0], args[1] if len(args) == 2 else args[0]))
        else:
            raise WorkflowSyntaxError(lineno, f"cannot parse {raw.strip()!r}")
    if not steps:
        raise WorkflowSyntaxError(0, "workflow has no steps")
    return WorkflowDefinition(name, steps)


def bundled(name: str) -> str:
    return resources.files("ftfloor.data").joinpath(name).read_text(encoding="utf-8")


# -- endpoints --------------------------------------------------------------

class LocalEndpoint:
    """Calls a ``Gateway`` in-process."""

    def __init__(self, gateway):
        self.gateway = gateway

    def call(self, method: str, target: str):
        return self.gateway.dispatch(method, target)


class HttpEndpoint:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, method: str, target: str):
        req = urllib.request.Request(self.base_url + target, method=method, data=b"" if method == "POST" else None)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, json.loads(resp.read() or b"null")
        except urllib.error.HTTPError as err:
            body = err.read()
            try:
                doc = json.loads(body)
            except ValueError:
                doc = {"status": "error", "error_type": "http_error", "detail": body.decode(errors="replace")}
            return err.code, doc
        except (urllib.error.URLError, OSError) as exc:
            raise EndpointUnreachable(str(exc)) from exc


def _target(url: str) -> str:
    parts = urlsplit(url)
    return parts.path + (f"?{parts.query}" if parts.query else "")


def auto_complete(delay: float = 0.0):
    """Human-task hook that signs off every task after ``delay`` seconds."""

    def hook(task_id: str, endpoint):
        if delay:
            time.sleep(delay)
        endpoint.call("POST", f"/tasks/{quote(task_id)}/complete")

    return hook


def execute_workflow(
    definition: WorkflowDefinition,
    endpoint,
    on_human=None,
    human_timeout: float | None = None,
    poll_interval: float = 0.05,
) -> WorkflowTrace:
    """Run steps strictly in order; the first non-ok step aborts the run.

    ``on_human(task_id, endpoint)`` is called once a human task is open; the
    executor then waits until the task is reported completed.
    """
    trace = WorkflowTrace(definition.name)
    for i, step in enumerate(definition.steps):
        try:
            if isinstance(step, ServiceStep):
                entry = _run_service(i, step, endpoint)
            else:
                entry = _run_human(i, step, endpoint, on_human, human_timeout, poll_interval)
        except EndpointUnreachable as exc:
            target = step.service_url if isinstance(step, ServiceStep) else step.task_id
            entry = TraceEntry(i, _kind(step), target, "transport_error", None, None, str(exc))
        trace.entries.append(entry)
        if entry.outcome != "ok":
            trace.status = "aborted"
            break
    return trace


def _kind(step) -> str:
    return "service" if isinstance(step, ServiceStep) else "human"


def _run_service(i: int, step: ServiceStep, endpoint) -> TraceEntry:
    status, doc = endpoint.call("GET", _target(step.service_url))
    doc = doc if isinstance(doc, dict) else {}
    if status == 200:
        return TraceEntry(i, "service", step.service_url, "ok", doc.get("start_time"), doc.get("end_time"))
    return TraceEntry(
        i,
        "service",
        step.service_url,
        doc.get("error_type", f"http_{status}"),
        doc.get("start_time"),
        doc.get("end_time"),
        doc.get("failed_condition"),
    )


def _run_human(i, step: HumanTask, endpoint, on_human, timeout, poll_interval) -> TraceEntry:
    status, doc = endpoint.call("POST", f"/tasks/{quote(step.task_id)}/open?label={quote(step.label)}")
    if status != 200:
        return TraceEntry(i, "human", step.task_id, doc.get("error_type", f"http_{status}"), None, None)
    opened = doc["opened_at"]
    if on_human is not None:
        on_human(step.task_id, endpoint)
    deadline = None if timeout is None else time.monotonic() + timeout
    while True:
        status, doc = endpoint.call("GET", f"/tasks/{quote(step.task_id)}")
        if status == 200 and doc.get("state") == "completed":
            return TraceEntry(i, "human", step.task_id, "ok", opened, doc["completed_at"])
        if deadline is not None and time.monotonic() > deadline:
            return TraceEntry(i, "human", step.task_id, "timeout", opened, None)
        time.sleep(poll_interval)
