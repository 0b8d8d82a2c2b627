"""Plan for a goal with BFS, then execute the plan on the twin."""

import argparse
import time

from ftfloor import catalog as C
from ftfloor import pddl, sim, topology
from ftfloor.config import parse_scenario
from ftfloor.workflow import bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--goal", default=None, help="goal file (default: bundled burn_and_store.goal)")
    ap.add_argument("--depth", type=int, default=10)
    args = ap.parse_args()

    topo = topology.default_topology()
    cat = C.generate(topo)
    scenario, faults = parse_scenario(bundled("burn_and_store.scenario.toml"))
    state = sim.initial_state(topo, scenario, faults)
    goal = open(args.goal).read() if args.goal else bundled("burn_and_store.goal")
    domain, problem = pddl.export_domain(cat), pddl.export_problem(state, goal, cat)

    t0 = time.perf_counter()
    plan = pddl.solve(domain, problem, args.depth)
    print(f"search: {(time.perf_counter() - t0) * 1000:.1f} ms")
    if plan is None:
        print("no plan")
        return
    for url, step in zip(pddl.plan_urls(plan, cat), plan):
        print(f"{step}\n    {url}")
    result = pddl.replay(plan, state, cat)
    print("replay:", "ok" if result.ok else f"failed at step {result.fails_at}: {result.failure.outcome}")


if __name__ == "__main__":
    main()
