"""Run the bundled sink-to-warehouse workflow on the simulated twin and print its trace."""

import argparse
import sys

from ftfloor import catalog as C
from ftfloor import sim, topology
from ftfloor.config import parse_scenario
from ftfloor.engine import Engine
from ftfloor.gateway import Gateway
from ftfloor.workflow import LocalEndpoint, auto_complete, bundled, execute_workflow, parse_workflow


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fault", action="append", default=[], help="machine to fault before starting")
    args = ap.parse_args()

    topo = topology.default_topology()
    cat = C.generate(topo)
    scenario, faults = parse_scenario(bundled("burn_and_store.scenario.toml"))
    engine = Engine(cat, sim.initial_state(topo, scenario, faults + args.fault))
    trace = execute_workflow(
        parse_workflow(bundled("burn_and_store.workflow")), LocalEndpoint(Gateway(cat, engine)), on_human=auto_complete()
    )
    for e in trace.entries:
        print(f"{e.index}  {e.kind:7s} {e.outcome:22s} {e.start_time} -> {e.end_time}  {e.target}")
        if e.failed_condition:
            print(f"   failed: {e.failed_condition}")
    print(f"status: {trace.status}")
    print(f"wp_1: {engine.state.workpieces['wp_1'].to_dict()}")
    return 0 if trace.status == "completed" else 1


if __name__ == "__main__":
    sys.exit(main())
