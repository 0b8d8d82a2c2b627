import pytest

from ftfloor import catalog as C
from ftfloor import sim, topology
from ftfloor.engine import Engine

SINK_TO_OVEN = "http://127.0.0.1:5000/vgr/pick_up_and_transport?machine=vgr_1&start=sink_1&end=oven"
BURN_AND_STORE = [{"id": "wp_1", "position": "sink_1", "color": "white"}]


@pytest.fixture(scope="session")
def topo():
    return topology.default_topology()


@pytest.fixture(scope="session")
def cat(topo):
    return C.generate(topo)


@pytest.fixture(scope="session")
def kb(cat):
    return C.load_catalog_kb(cat)


@pytest.fixture
def burn_and_store_state(topo):
    return sim.initial_state(topo, BURN_AND_STORE)


@pytest.fixture
def engine(cat, burn_and_store_state):
    return Engine(cat, burn_and_store_state)


def url(cat, prefix, base, **params):
    """Catalog URL for a service, failing loudly if it does not exist."""
    found = [
        s.url
        for s in cat.services.values()
        if s.base_name == base and cat.topology.machine(s.provider).url_prefix == prefix and s.parameters == params
    ]
    assert len(found) == 1, (prefix, base, params)
    return found[0]


# criterion number -> (passed, label, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, label, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {label}: {detail}")
