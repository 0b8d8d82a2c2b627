import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftfloor import sim

from conftest import SINK_TO_OVEN, url


def test_initial_state(burn_and_store_state):
    assert burn_and_store_state.clock == 0.0
    assert burn_and_store_state.occupant("sink_1") == "wp_1"
    assert all(m.state == "ready" for m in burn_and_store_state.machines.values())
    sim.check_invariants(burn_and_store_state)


@pytest.mark.parametrize(
    "placements",
    [
        [{"id": "a", "position": "sink_1"}, {"id": "a", "position": "oven"}],
        [{"id": "a", "position": "sink_1"}, {"id": "b", "position": "sink_1"}],
        [{"id": "a", "position": "moon"}],
        [{"id": "a", "position": "oven", "color": "green"}],
        [{"id": "a", "slot": "s99"}],
    ],
)
def test_bad_scenarios(topo, placements):
    with pytest.raises(sim.ScenarioError):
        sim.initial_state(topo, placements)


def test_transport_moves_workpiece(cat, burn_and_store_state):
    res = sim.apply(burn_and_store_state, cat.services[SINK_TO_OVEN])
    assert res.new_state.occupant("oven") == "wp_1"
    assert res.new_state.occupant("sink_1") is None
    assert res.duration == 5.0 and res.new_state.clock == 5.0
    assert burn_and_store_state.occupant("sink_1") == "wp_1"  # input untouched


def test_light_barrier_readings(cat, burn_and_store_state):
    assert sim.read_sensor(burn_and_store_state, "sm_1", "status_of_light_barrier", 6) == {"interrupted": "true"}
    assert sim.read_sensor(burn_and_store_state, "ov_1", "status_of_light_barrier", 5) == {"interrupted": "false"}
    with pytest.raises(sim.UnknownSensor):
        sim.read_sensor(burn_and_store_state, "ov_1", "status_of_light_barrier", 9)


def test_store_auto_takes_lowest_free_slot(cat, topo):
    state = sim.initial_state(topo, [{"id": "a", "position": "high_bay_warehouse"}, {"id": "b", "slot": "s1"}])
    res = sim.apply(state, cat.services[url(cat, "hbw", "store", machine="hbw_1", slot="auto")])
    assert res.new_state.workpieces["a"].slot == ("hbw_1", "s2")


def test_store_full_warehouse(cat, topo):
    full = [{"id": f"w{i}", "slot": f"s{i}"} for i in range(1, 10)]
    state = sim.initial_state(topo, full + [{"id": "x", "position": "high_bay_warehouse"}])
    with pytest.raises(sim.ResourceFull):
        sim.apply(state, cat.services[url(cat, "hbw", "store", machine="hbw_1", slot="auto")])


def test_sort_requires_matching_color(cat, topo):
    state = sim.initial_state(topo, [{"id": "a", "position": "sm_entry", "color": "red"}])
    wrong = cat.services[url(cat, "sm", "sort", machine="sm_1", color="blue", ejection="sink_2")]
    with pytest.raises(sim.NotApplicable):
        sim.apply(state, wrong)
    right = cat.services[url(cat, "sm", "sort", machine="sm_1", color="red", ejection="sink_2")]
    done = sim.apply(state, right).new_state
    assert done.occupant("sink_2") == "a" and "sorted" in done.workpieces["a"].flags


def test_faulted_machine_refuses(cat, burn_and_store_state):
    broken = sim.inject_fault(burn_and_store_state, "vgr_1", "on")
    with pytest.raises(sim.MachineError):
        sim.apply(broken, cat.services[SINK_TO_OVEN])
    assert sim.inject_fault(broken, "vgr_1", "on") is broken


def test_set_motor_speed_input_range(cat, burn_and_store_state):
    svc = cat.services[url(cat, "ov", "setMotorSpeed", machine="ov_1", motor="feeder")]
    assert sim.apply(burn_and_store_state, svc, {"speed": "300"}).new_state.machines["ov_1"].motor_speeds["feeder"] == 300
    with pytest.raises(sim.NotApplicable):
        sim.apply(burn_and_store_state, svc, {"speed": "1001"})


def test_snapshot_is_canonical(burn_and_store_state, topo):
    assert burn_and_store_state.snapshot() == sim.initial_state(topo, [{"id": "wp_1", "position": "sink_1"}]).snapshot()


# -- property: random service sequences keep the physical invariants --------

@pytest.fixture(scope="module")
def actuations(cat):
    return [s for s in cat.services.values() if s.kind == "actuation"]


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_invariants_under_random_sequences(topo, actuations, data):
    n = data.draw(st.integers(0, 3), label="workpieces")
    spots = data.draw(st.permutations(sorted(topo.owners)), label="spots")[:n]
    state = sim.initial_state(topo, [{"id": f"w{i}", "position": p} for i, p in enumerate(spots)])
    clock = state.clock
    for _ in range(data.draw(st.integers(0, 50), label="steps")):
        svc = data.draw(st.sampled_from(actuations))
        try:
            state = sim.apply(state, svc, {}).new_state
        except sim.SimError:
            continue
        sim.check_invariants(state)
        assert state.clock >= clock
        clock = state.clock
        assert len(state.workpieces) == n
