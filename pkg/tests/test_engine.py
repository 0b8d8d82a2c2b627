import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftfloor import sim
from ftfloor.engine import PENDING, Engine, UnknownTicket, format_timestamp, parse_timestamp

from conftest import SINK_TO_OVEN, url


def test_timestamp_format():
    assert format_timestamp(0) == "1970-01-01T00:00:00.000Z"
    assert format_timestamp(13.25) == "1970-01-01T00:00:13.250Z"
    assert parse_timestamp(format_timestamp(1234.5)) == 1234.5


def test_single_request(engine):
    rec = engine.execute(SINK_TO_OVEN)
    assert rec.outcome == "ok"
    assert (rec.start_time, rec.end_time) == (0.0, 5.0)
    assert engine.state.occupant("oven") == "wp_1"


def test_unknown_ticket(engine):
    with pytest.raises(UnknownTicket):
        engine.poll(99)


def test_poll_pending_then_done(engine):
    t = engine.submit(SINK_TO_OVEN)
    assert engine.poll(t) is PENDING
    engine.run_until_idle()
    assert engine.poll(t).outcome == "ok"


def test_unknown_service(engine):
    rec = engine.execute("http://127.0.0.1:5000/vgr/teleport?machine=vgr_1")
    assert rec.outcome == "unknown_service"


def test_precondition_failure_leaves_state(cat, topo):
    state = sim.initial_state(topo, [{"id": "a", "position": "sink_1"}, {"id": "b", "position": "oven"}])
    eng = Engine(cat, state)
    before = eng.snapshot()
    rec = eng.execute(SINK_TO_OVEN)
    assert rec.outcome == "precondition_violated"
    assert rec.failed_condition == "Precondition_OV_1_Status_Of_Light_Barrier_5_Interrupted_False"
    assert eng.snapshot() == before


def test_calibrate_mutual_exclusion(cat, engine):
    cal = url(cat, "ov", "calibrate", machine="ov_1")
    tickets = [engine.submit(cal) for _ in range(10)]
    engine.run_until_idle()
    recs = [engine.poll(t) for t in tickets]
    assert all(r.outcome == "ok" for r in recs)
    for a, b in zip(recs, recs[1:]):
        assert a.end_time <= b.start_time
    assert [r.ticket for r in sorted(recs, key=lambda r: r.end_time)] == tickets


def test_disjoint_resources_overlap(cat, engine):
    a = engine.submit(url(cat, "ov", "calibrate", machine="ov_1"))
    b = engine.submit(url(cat, "dm", "calibrate", machine="dm_1"))
    engine.run_until_idle()
    ra, rb = engine.poll(a), engine.poll(b)
    assert ra.start_time == rb.start_time == 0.0


def test_blocked_request_is_not_overtaken_on_same_resource(cat, engine):
    first = engine.submit(url(cat, "ov", "calibrate", machine="ov_1"))
    burn = engine.submit(url(cat, "ov", "calibrate", machine="ov_1"))
    engine.run_until_idle()
    assert engine.poll(first).end_time <= engine.poll(burn).start_time


def test_sensing_during_burn_returns_before_burn_ends(cat, engine):
    engine.execute(SINK_TO_OVEN)
    burn = engine.submit(url(cat, "ov", "burn", machine="ov_1", duration="standard"))
    engine.run_step(horizon=engine.now() + 1.0)  # burn started, clock mid-burn
    read = engine.submit(url(cat, "ov", "statusOfLightBarrier", machine="ov_1", lb="5"))
    rec = engine.wait(read)
    assert rec.response == {"interrupted": "true"}
    burn_rec = engine.wait(burn)
    assert rec.end_time < burn_rec.end_time


def test_postconditions_hold_after_each_step(cat, engine):
    rec = engine.execute(SINK_TO_OVEN)
    assert rec.outcome == "ok"
    for b in cat.services[SINK_TO_OVEN].postconditions:
        assert engine.read_checker(b.checker_url)[b.required_key] == b.required_value


def test_real_time_mode_runs(cat, burn_and_store_state):
    eng = Engine(cat, burn_and_store_state, clock="real", time_scale=0.001)
    eng.start()
    try:
        rec = eng.execute(SINK_TO_OVEN, timeout=5)
        assert rec.outcome == "ok"
        assert rec.end_time - rec.start_time >= 0.004
    finally:
        eng.stop()


def test_threaded_clients_in_sim_mode(cat, engine):
    cal = url(cat, "dm", "calibrate", machine="dm_1")
    out = []
    threads = [threading.Thread(target=lambda: out.append(engine.execute(cal))) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(10)
    assert len(out) == 8 and all(r.outcome == "ok" for r in out)
    spans = sorted((r.start_time, r.end_time) for r in out)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


# -- property: no request is lost or answered twice --------------------------

@settings(max_examples=5, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=1000, max_size=1000))
def test_no_lost_requests(cat, topo, picks):
    services = sorted(cat.services)
    eng = Engine(cat, sim.initial_state(topo, [{"id": "wp_1", "position": "sink_1"}]))
    tickets = [eng.submit(services[i % len(services)]) for i in picks]
    eng.run_until_idle()
    assert len({r.ticket for r in eng.trace}) == len(eng.trace) == 1000
    assert sorted(r.ticket for r in eng.trace) == sorted(tickets)
    assert eng.pending() == 0
