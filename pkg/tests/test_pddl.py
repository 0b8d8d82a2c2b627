import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftfloor import catalog as C
from ftfloor import pddl, sim
from ftfloor.engine import evaluate_conditions
from ftfloor.pddl.compile import WORKPIECE_BASES
from ftfloor.pddl.planner import SearchLimitExceeded
from ftfloor.workflow import bundled

from conftest import BURN_AND_STORE

STORE_GOAL = [("burned", "wp_1"), ("stored", "wp_1", "?any")]


@pytest.fixture(scope="module")
def domain(cat):
    return pddl.export_domain(cat)


def _problem(topo, placements, goal, cat):
    return pddl.export_problem(sim.initial_state(topo, placements), goal, cat)


# -- independent oracle: search the simulator itself --------------------------

def _holds(state, goal):
    for atom in goal:
        name, w = atom[0], atom[1]
        wp = state.workpieces[w]
        if name == "stored" and wp.slot is None:
            return False
        if name == "at" and wp.position != atom[2]:
            return False
        if name not in ("stored", "at") and name not in wp.flags:
            return False
    return True


def oracle_length(cat, state, goal, max_depth):
    """Shortest number of guarded simulator steps reaching ``goal`` (BFS)."""
    services = [
        s for s in cat.services.values() if s.base_name in WORKPIECE_BASES and "auto" not in s.parameters.values()
    ]

    def key(st_):
        return (
            tuple(sorted((w.id, w.position, w.slot, tuple(sorted(w.flags))) for w in st_.workpieces.values())),
            tuple(sorted((m, rt.position) for m, rt in st_.machines.items())),
        )

    frontier, seen = [state], {key(state)}
    for depth in range(max_depth + 1):
        if any(_holds(st_, goal) for st_ in frontier):
            return depth
        nxt = []
        for st_ in frontier:
            for svc in services:
                check = evaluate_conditions(svc.preconditions, lambda u: sim.read_service(st_, C.lookup(cat, u)))
                if check["result"] != "pass":
                    continue
                try:
                    new = sim.apply(st_, svc).new_state
                except sim.SimError:
                    continue
                if key(new) not in seen:
                    seen.add(key(new))
                    nxt.append(new)
        frontier = nxt
    return None


def test_oracle_burn_and_store_needs_four_steps(cat, burn_and_store_state):
    assert oracle_length(cat, burn_and_store_state, STORE_GOAL, 4) == 4


# -- exporter ---------------------------------------------------------------

def test_outputs_parse(domain, topo, cat):
    assert pddl.check_grammar(domain)
    problem = _problem(topo, BURN_AND_STORE, STORE_GOAL, cat)
    assert pddl.check_grammar(problem)
    pddl.parse_problem(problem, pddl.parse_domain(domain))


def test_domain_is_lowercase_and_sorted(domain):
    assert domain == domain.lower()
    names = [ln.split()[1] for ln in domain.splitlines() if ln.strip().startswith("(:action")]
    assert names == sorted(names)
    assert "vgr_pick_up_and_transport" in names and "ov_burn" in names
    assert len(names) == 14


def test_domain_is_byte_stable(cat, domain):
    assert pddl.export_domain(C.generate(cat.topology)) == domain


def test_empty_catalog_gives_no_actions(cat):
    empty = C.ServiceCatalog(cat.topology, {}, [])
    dom = pddl.parse_domain(pddl.export_domain(empty))
    assert dom.actions == []


def test_goal_file_parses():
    assert pddl.parse_goal(bundled("burn_and_store.goal")) == STORE_GOAL


@pytest.mark.parametrize(
    "goal",
    [[], [("teleported", "wp_1")], [("burned", "wp_9")], [("burned", "wp_1", "oven")]],
)
def test_bad_goals(topo, cat, goal):
    with pytest.raises(pddl.PddlSyntaxError):
        _problem(topo, BURN_AND_STORE, goal, cat)


@pytest.mark.parametrize(
    "text",
    [
        "(define (domain x) (:requirements :adl))",
        "(define (domain x) (:predicates (p ?a)) (:action a :parameters () :precondition (q) :effect (p)))",
        "(define (domain X))",
        "(define (domain x)",
        "(define (problem p) (:domain x) (:objects a) (:init) (:goal (p ?v)))",
    ],
)
def test_grammar_rejects(text):
    with pytest.raises(pddl.PddlSyntaxError):
        pddl.check_grammar(text)


# -- planner ----------------------------------------------------------------

def test_burn_and_store_plan(domain, topo, cat, burn_and_store_state):
    plan = pddl.solve(domain, _problem(topo, BURN_AND_STORE, STORE_GOAL, cat), 8)
    assert plan == [
        "(vgr_pick_up_and_transport vgr_1 wp_1 sink_1 oven ov_1)",
        "(ov_burn ov_1 wp_1 oven)",
        "(vgr_pick_up_and_transport vgr_1 wp_1 oven high_bay_warehouse hbw_1)",
        "(hbw_store hbw_1 wp_1 high_bay_warehouse s1)",
    ]
    assert len(plan) == oracle_length(cat, burn_and_store_state, STORE_GOAL, 4)
    result = pddl.replay(plan, burn_and_store_state, cat)
    assert result.ok and len(result.records) == 4


def test_goal_already_true(domain, topo, cat):
    assert pddl.solve(domain, _problem(topo, BURN_AND_STORE, [("at", "wp_1", "sink_1")], cat), 3) == []


def test_depth_bound_respected(domain, topo, cat):
    assert pddl.solve(domain, _problem(topo, BURN_AND_STORE, STORE_GOAL, cat), 3) is None


def test_faulted_oven_has_no_plan(domain, topo, cat):
    state = sim.initial_state(topo, BURN_AND_STORE, faults=["ov_1"])
    problem = pddl.export_problem(state, [("burned", "wp_1")], cat)
    assert pddl.solve(domain, problem, 5) is None


def test_state_cap(domain, topo, cat):
    problem = _problem(topo, BURN_AND_STORE, [("drilled", "wp_1"), ("punched", "wp_1"), ("milled", "wp_1")], cat)
    with pytest.raises(SearchLimitExceeded):
        pddl.solve(domain, problem, 20, max_states=50)


def test_replay_reports_failing_step(topo, cat, burn_and_store_state):
    plan = ["(ov_burn ov_1 wp_1 oven)"]
    result = pddl.replay(plan, burn_and_store_state, cat)
    assert not result.ok and result.fails_at == 0
    assert result.failure.outcome == "precondition_violated"


def test_unmappable_step(cat, burn_and_store_state):
    with pytest.raises(pddl.ReplayError):
        pddl.replay(["(vgr_pick_up_and_transport vgr_1 wp_1 sink_1 mars ov_1)"], burn_and_store_state, cat)


# -- property: plans are sound on the simulator ------------------------------

_GOALS = [
    [("burned", "wp_1")],
    [("drilled", "wp_1")],
    [("stored", "wp_1", "?any")],
    [("at", "wp_1", "oven")],
    [("at", "wp_1", "delivery_station")],
    [("burned", "wp_1"), ("stored", "wp_1", "?s")],
]
_STARTS = ["sink_1", "sink_2", "sink_3", "delivery_station", "storage_buffer", "oven", "drilling_machine"]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(_STARTS), st.sampled_from(["white", "red", "blue"]), st.sampled_from(_GOALS))
def test_plans_replay_on_simulator(domain, topo, cat, start, color, goal):
    placements = [{"id": "wp_1", "position": start, "color": color}]
    problem = _problem(topo, placements, goal, cat)
    plan = pddl.solve(domain, problem, 6)
    if plan is None:
        return
    reached, _ = pddl.simulate(domain, problem, plan)
    assert reached
    state = sim.initial_state(topo, placements)
    result = pddl.replay(plan, state, cat)
    assert result.ok, result.failure


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(_STARTS), st.sampled_from(_GOALS))
def test_plan_length_matches_oracle(domain, topo, cat, start, goal):
    placements = [{"id": "wp_1", "position": start}]
    plan = pddl.solve(domain, _problem(topo, placements, goal, cat), 4)
    expected = oracle_length(cat, sim.initial_state(topo, placements), goal, 4)
    assert (None if plan is None else len(plan)) == expected
