import time

import pytest

from ftfloor import catalog as C
from ftfloor import kb as K
from ftfloor import topology as T

from conftest import SINK_TO_OVEN


def test_table_cells_match(cat):
    assert cat.counts() == T.SERVICE_COUNTS


def test_spot_anchors(cat):
    counts = cat.counts()
    assert counts["vacuum_gripper_robot"]["pickUpAndTransport"] == 72
    assert counts["high_bay_warehouse"]["changeBuckets"] == 81
    assert counts["sorting_machine"]["sort"] == 20
    assert counts["high_bay_warehouse"]["store"] == 10


def test_totals(cat):
    assert len(cat.base_services) == 67
    assert len(cat.services) == 341
    # independent sum over the literal table
    assert sum(n for row in T.SERVICE_COUNTS.values() for n in row.values()) == 341
    assert sum(len(row) for row in T.SERVICE_COUNTS.values()) == 67


def test_counts_table_reports_discrepancy(cat):
    text = C.counts_table(cat)
    assert "base: 67, total: 341" in text
    assert "336" in text


def test_generation_is_deterministic(topo, cat):
    again = C.generate(topo)
    assert list(again.services) == list(cat.services)
    assert again.services[SINK_TO_OVEN] == cat.services[SINK_TO_OVEN]


def test_sink_to_oven_names(cat):
    svc = cat.services[SINK_TO_OVEN]
    assert svc.iri.local == "Service_VGR_Pick_Up_And_Transport_VGR_1_Start_Sink_1_End_Oven"
    assert svc.class_iri.local == "ServiceVGRPickUpAndTransport"
    assert svc.required_resources == frozenset({"vgr_1", "sm_1", "ov_1"})


def test_two_floors_double_shared_services():
    cat2 = C.generate(T.default_topology(floors=2))
    assert len(cat2.services) == 2 * 341
    assert any("machine=vgr_2" in u for u in cat2.services)


def test_url_parameter_order_is_canonical(cat):
    shuffled = "http://127.0.0.1:5000/vgr/pick_up_and_transport?end=oven&start=sink_1&machine=vgr_1"
    assert C.canonical_url(cat, shuffled)[0] == SINK_TO_OVEN
    assert C.canonical_url(cat, "http://127.0.0.1:5000/vgr/fly?machine=vgr_1")[0] is None


def test_sensing_services_have_no_conditions(cat):
    for s in cat.services.values():
        if s.kind == "sensing":
            assert not s.preconditions and not s.postconditions


def test_every_actuation_checks_provider_ready(cat):
    for s in cat.services.values():
        if s.kind == "actuation":
            assert any(
                b.condition.local == f"Precondition_{s.provider.upper()}_State_Of_Machine_Ready" for b in s.preconditions
            )


def test_sort_requires_sorting_machine_ready(cat, kb):
    sorts = [s.url for s in cat.services.values() if s.base_name == "sort"]
    assert len(sorts) == 20
    assert set(sorts) <= set(K.unavailable_services(kb, ["sm_1"]))


def test_mismatched_table_cell_is_rejected(topo, monkeypatch):
    bad = {k: dict(v) for k, v in T.SERVICE_COUNTS.items()}
    bad["oven"]["burn"] = 3
    monkeypatch.setattr(C, "SERVICE_COUNTS", bad)
    with pytest.raises(T.TopologyError):
        C.generate(topo)


def test_runtime_under_one_second(topo):
    t0 = time.perf_counter()
    C.generate(topo)
    assert time.perf_counter() - t0 < 1.0
