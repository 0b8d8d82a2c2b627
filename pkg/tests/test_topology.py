from dataclasses import replace

import pytest

from ftfloor import topology as T


def test_all_kinds_present(topo):
    assert sorted({m.kind for m in topo.machines}) == sorted(T.MACHINE_KINDS)


def test_owner_and_sensor_lookup(topo):
    assert topo.owner("sink_1") == "sm_1"
    assert topo.owner("oven") == "ov_1"
    assert topo.sensor_at("oven") == T.Sensor("ov_1", "light_barrier", 5)
    assert topo.sensor_at("sink_1") == T.Sensor("sm_1", "light_barrier", 6)
    with pytest.raises(T.TopologyError):
        topo.owner("moon")


def test_local_world_mapping(topo):
    mm = topo.machine("mm_1")
    assert mm.world("pos_input") == "milling_machine"
    assert mm.local("milling_machine") == "pos_input"


def test_second_floor_is_disjoint():
    two = T.default_topology(floors=2)
    assert two.machine("vgr_2").world("sink_1") == "sink_1_f2"
    floor1 = {w for w, m in two.owners.items() if two.machine(m).floor == 1}
    floor2 = {w for w, m in two.owners.items() if two.machine(m).floor == 2}
    assert floor1 and floor2 and not floor1 & floor2


def test_foreign_pin_rejected(topo):
    ov = topo.machine("ov_1")
    bad = replace(ov, light_barriers={5: "sink_1"})
    machines = [bad if m.id == "ov_1" else m for m in topo.machines]
    with pytest.raises(T.TopologyError):
        T.Topology(machines, dict(topo.owners)).validate()


def test_floor_count_checked():
    with pytest.raises(T.TopologyError):
        T.default_topology(floors=3)
