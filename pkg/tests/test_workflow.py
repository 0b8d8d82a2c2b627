import threading

import pytest

from ftfloor import sim
from ftfloor.engine import Engine
from ftfloor.gateway import Gateway
from ftfloor.workflow import (
    HttpEndpoint,
    HumanTask,
    LocalEndpoint,
    ServiceStep,
    WorkflowSyntaxError,
    auto_complete,
    bundled,
    execute_workflow,
    parse_workflow,
)

from conftest import BURN_AND_STORE


@pytest.fixture
def gateway(cat, topo):
    return Gateway(cat, Engine(cat, sim.initial_state(topo, BURN_AND_STORE)), scenario=BURN_AND_STORE)


def test_parse_bundled():
    wf = parse_workflow(bundled("burn_and_store.workflow"))
    assert wf.name == "burn_and_store"
    assert [type(s) for s in wf.steps] == [ServiceStep, ServiceStep, HumanTask, ServiceStep, ServiceStep]
    assert wf.steps[2] == HumanTask("quality_inspection", "Quality inspection")


@pytest.mark.parametrize("text", ["", "# only a comment\n", "service\n", "frobnicate x\n", 'human a "b" c\n'])
def test_parse_errors(text):
    with pytest.raises(WorkflowSyntaxError):
        parse_workflow(text)


def test_burn_and_store_end_to_end(gateway):
    trace = execute_workflow(parse_workflow(bundled("burn_and_store.workflow")), LocalEndpoint(gateway), on_human=auto_complete())
    assert trace.status == "completed"
    assert [e.outcome for e in trace.entries] == ["ok"] * 5
    stamps = [t for e in trace.entries for t in (e.start_time, e.end_time)]
    assert stamps == sorted(stamps)
    wp = gateway.engine.state.workpieces["wp_1"]
    assert wp.slot is not None and wp.slot[0] == "hbw_1"
    assert "burned" in wp.flags


def test_abort_on_first_failure(cat, topo):
    gw = Gateway(cat, Engine(cat, sim.initial_state(topo, [])))
    trace = execute_workflow(parse_workflow(bundled("burn_and_store.workflow")), LocalEndpoint(gw), on_human=auto_complete())
    assert trace.status == "aborted"
    assert len(trace.entries) == 1
    assert trace.entries[0].outcome == "precondition_violated"
    assert trace.entries[0].failed_condition == "Precondition_SM_1_Status_Of_Light_Barrier_6_Interrupted_True"


def test_human_task_waits_for_completion(gateway):
    wf = parse_workflow('human qi "Inspect"\n')
    ep = LocalEndpoint(gateway)
    timer = threading.Timer(0.2, lambda: ep.call("POST", "/tasks/qi/complete"))
    timer.start()
    trace = execute_workflow(wf, ep, poll_interval=0.01)
    assert trace.status == "completed"


def test_human_timeout(gateway):
    trace = execute_workflow(parse_workflow("human qi\n"), LocalEndpoint(gateway), human_timeout=0.05, poll_interval=0.01)
    assert trace.entries[0].outcome == "timeout"


def test_unreachable_endpoint():
    trace = execute_workflow(parse_workflow("service http://127.0.0.1:1/x?machine=a\n"), HttpEndpoint("http://127.0.0.1:1", timeout=1))
    assert trace.entries[0].outcome == "transport_error"


def test_trace_jsonl_is_stable(cat, topo):
    def run():
        gw = Gateway(cat, Engine(cat, sim.initial_state(topo, BURN_AND_STORE)))
        return execute_workflow(parse_workflow(bundled("burn_and_store.workflow")), LocalEndpoint(gw), on_human=auto_complete())

    assert run().to_jsonl() == run().to_jsonl()
