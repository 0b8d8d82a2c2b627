"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (violated condition, unknown
service, no plan, ...), 2 usage error.

One-shot subcommands run against an in-process twin unless ``--endpoint``
names a running ``serve`` instance. Config comes from ``--config`` or
``$FTFLOOR_CONFIG``; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from urllib.parse import quote, urlsplit

from . import kb as K
from . import pddl, sim
from .catalog import counts_table, generate, load_catalog_kb
from .config import Config, ConfigError, load_config, parse_scenario
from .engine import Engine
from .gateway import Gateway, make_server
from .workflow import (
    EndpointUnreachable,
    HttpEndpoint,
    LocalEndpoint,
    WorkflowSyntaxError,
    auto_complete,
    bundled,
    execute_workflow,
    parse_workflow,
)

log = logging.getLogger("ftfloor")


class DomainFailure(Exception):
    pass


def _read(name: str) -> str:
    """File contents, falling back to a bundled resource of the same name."""
    p = Path(name)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    try:
        return bundled(p.name)
    except (FileNotFoundError, OSError):
        raise DomainFailure(f"no such file: {name}") from None


def _scenario_for(args, workflow_file: str | None = None) -> tuple[list, list]:
    if getattr(args, "scenario", None):
        return parse_scenario(_read(args.scenario))
    if workflow_file:
        stem = Path(workflow_file).name.rsplit(".", 1)[0]
        sibling = Path(workflow_file).with_name(f"{stem}.scenario.toml")
        try:
            return parse_scenario(_read(str(sibling)))
        except DomainFailure:
            pass
    return [], []


class _Context:
    def __init__(self, cfg: Config, scenario=(), faults=()):
        self.cfg = cfg
        self.topology = cfg.topology()
        self.catalog = generate(self.topology)
        self.state = sim.initial_state(self.topology, scenario, faults)
        self.engine = Engine(self.catalog, self.state, clock=cfg.clock, time_scale=cfg.time_scale)
        self.gateway = Gateway(self.catalog, self.engine, scenario=scenario, faults=faults)


def _config(args) -> Config:
    cfg = load_config(args.config)
    for name in ("port", "clock", "floors"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.__post_init__()
    return cfg


def _endpoint(args, ctx_factory):
    if args.endpoint:
        return HttpEndpoint(args.endpoint)
    return LocalEndpoint(ctx_factory().gateway)


def _target(url: str) -> str:
    parts = urlsplit(url)
    return parts.path + (f"?{parts.query}" if parts.query else "")


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


# -- subcommands ------------------------------------------------------------

def cmd_serve(args) -> int:
    cfg = _config(args)
    scenario, faults = parse_scenario(_read(args.scenario)) if args.scenario else ([], [])
    ctx = _Context(cfg, scenario, faults)
    server = make_server(ctx.gateway, cfg.host, cfg.port)
    if cfg.clock == "real":
        ctx.engine.start()
    log.info("serving %d services on http://%s:%d (clock=%s)", len(ctx.catalog.services), cfg.host, cfg.port, cfg.clock)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        ctx.engine.stop()
    return 0


def cmd_catalog(args) -> int:
    cat = generate(_config(args).topology())
    if args.action == "list":
        for url in cat.services:
            print(url)
    elif args.action == "dump":
        sys.stdout.write(K.dump_triples(load_catalog_kb(cat)))
    else:
        print(counts_table(cat))
    return 0


def cmd_invoke(args) -> int:
    cfg = _config(args)
    scenario, faults = _scenario_for(args)
    endpoint = _endpoint(args, lambda: _Context(cfg, scenario, faults))
    status, doc = endpoint.call("GET", _target(args.url))
    _print_json(doc)
    return 0 if status == 200 else 1


def cmd_workflow(args) -> int:
    cfg = _config(args)
    try:
        definition = parse_workflow(_read(args.file), Path(args.file).stem)
    except WorkflowSyntaxError as exc:
        raise DomainFailure(f"{args.file}: {exc}") from None
    scenario, faults = _scenario_for(args, args.file)
    endpoint = _endpoint(args, lambda: _Context(cfg, scenario, faults))
    if args.auto_complete_human:
        hook = auto_complete(args.human_delay if args.human_delay is not None else cfg.human_delay)
    elif args.endpoint:
        def hook(task_id, _endpoint):
            print(f"waiting for human task {task_id}; run: ftfloor tasks complete {task_id}", file=sys.stderr)
    else:
        def hook(task_id, ep):
            print(f"human task {task_id}: press Enter when done", file=sys.stderr)
            sys.stdin.readline()
            ep.call("POST", f"/tasks/{quote(task_id)}/complete")

    trace = execute_workflow(definition, endpoint, on_human=hook, human_timeout=cfg.human_timeout)
    sys.stdout.write(trace.to_jsonl())
    print(f"workflow {trace.name}: {trace.status}", file=sys.stderr)
    return 0 if trace.status == "completed" else 1


def _pddl_inputs(args, cfg):
    scenario, faults = _scenario_for(args)
    topo = cfg.topology()
    cat = generate(topo)
    state = sim.initial_state(topo, scenario, faults)
    return cat, state


def cmd_pddl(args) -> int:
    cfg = _config(args)
    cat, state = _pddl_inputs(args, cfg)
    if args.action == "export-domain":
        sys.stdout.write(pddl.export_domain(cat))
        return 0
    if not args.goal:
        raise DomainFailure("--goal is required")
    problem = pddl.export_problem(state, _read(args.goal), cat)
    if args.action == "export-problem":
        sys.stdout.write(problem)
        return 0
    plan = pddl.solve(pddl.export_domain(cat), problem, args.depth)
    if plan is None:
        print(f"no plan within depth {args.depth}", file=sys.stderr)
        return 1
    for step in plan:
        print(step)
    if args.replay:
        result = pddl.replay(plan, state, cat)
        for rec in result.records:
            print(rec.trace_line(), file=sys.stderr)
        return 0 if result.ok else 1
    return 0


def cmd_fault(args) -> int:
    cfg = _config(args)
    endpoint = _endpoint(args, lambda: _Context(cfg))
    status, doc = endpoint.call("POST", f"/admin/fault?machine={quote(args.machine)}&mode={args.mode}")
    _print_json(doc)
    if status == 200:
        _, unavailable = endpoint.call("GET", "/admin/unavailable")
        _print_json(unavailable)
    return 0 if status == 200 else 1


def cmd_kb(args) -> int:
    cfg = _config(args)
    endpoint = _endpoint(args, lambda: _Context(cfg))
    status, doc = endpoint.call("GET", f"/kb/conditions?service={quote(args.service, safe='')}&role={args.role}")
    _print_json(doc)
    return 0 if status == 200 else 1


def cmd_validate(args) -> int:
    cfg = _config(args)
    kb = load_catalog_kb(generate(cfg.topology()))
    problems = K.validate(kb)
    for v in problems:
        print(f"{v.kind}\t{v.subject}\t{v.detail}")
    print(f"{len(kb)} triples, {len(problems)} violations", file=sys.stderr)
    return 0 if not problems else 1


def cmd_tasks(args) -> int:
    cfg = _config(args)
    endpoint = HttpEndpoint(args.endpoint or f"http://{cfg.authority}")
    status, doc = endpoint.call("POST", f"/tasks/{quote(args.task_id)}/complete")
    _print_json(doc)
    return 0 if status == 200 else 1


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (default: $FTFLOOR_CONFIG)")
    common.add_argument("--floors", type=int, choices=(1, 2))
    common.add_argument("--clock", choices=("sim", "real"))
    common.add_argument("--endpoint", help="base URL of a running gateway, e.g. http://127.0.0.1:5000")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ftfloor", description="Digital twin of a Fischertechnik shop floor")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP gateway")
    p.add_argument("--port", type=int)
    p.add_argument("--scenario", help="scenario TOML to start from")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("catalog", parents=[common], help="list, dump or count catalog services")
    p.add_argument("action", choices=("list", "dump", "counts"))
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("invoke", parents=[common], help="call one service URL")
    p.add_argument("url")
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_invoke)

    p = sub.add_parser("workflow", parents=[common], help="run a workflow file")
    p.add_argument("action", choices=("run",))
    p.add_argument("file")
    p.add_argument("--scenario")
    p.add_argument("--auto-complete-human", action="store_true")
    p.add_argument("--human-delay", type=float, help="seconds before auto-completing a human task")
    p.set_defaults(func=cmd_workflow)

    p = sub.add_parser("pddl", parents=[common], help="export PDDL or plan")
    p.add_argument("action", choices=("export-domain", "export-problem", "plan"))
    p.add_argument("--goal", help="goal file, one atom per line")
    p.add_argument("--scenario")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--replay", action="store_true", help="execute the plan on the twin")
    p.set_defaults(func=cmd_pddl)

    p = sub.add_parser("fault", parents=[common], help="switch a machine fault on or off")
    p.add_argument("machine")
    p.add_argument("mode", choices=("on", "off"))
    p.set_defaults(func=cmd_fault)

    p = sub.add_parser("kb", parents=[common], help="query condition bindings")
    p.add_argument("action", choices=("query",))
    p.add_argument("--service", required=True)
    p.add_argument("--role", choices=("pre", "post"), default="pre")
    p.set_defaults(func=cmd_kb)

    p = sub.add_parser("validate", parents=[common], help="check the generated ontology")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tasks", parents=[common], help="complete a waiting human task on a server")
    p.add_argument("action", choices=("complete",))
    p.add_argument("task_id")
    p.set_defaults(func=cmd_tasks)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (DomainFailure, ConfigError, sim.SimError, pddl.PddlSyntaxError, pddl.ReplayError, pddl.SearchLimitExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EndpointUnreachable as exc:
        print(f"error: endpoint unreachable: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
