import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftfloor import kb as K

from conftest import SINK_TO_OVEN

SINK_TO_OVEN_PRE = {
    "Precondition_OV_1_State_Of_Machine_Ready",
    "Precondition_OV_1_Status_Of_Light_Barrier_5_Interrupted_False",
    "Precondition_SM_1_Status_Of_Light_Barrier_6_Interrupted_True",
    "Precondition_VGR_1_State_Of_Machine_Ready",
    "Precondition_WT_1_Check_Position_Oven_False",
}
SINK_TO_OVEN_POST = {"Postcondition_OV_1_Status_Of_Light_Barrier_5_Interrupted_True"}


def naive_match(triples, patterns):
    """Reference join: try every assignment of triples to patterns."""
    triples = list(triples)
    rows = set()
    for combo in itertools.product(triples, repeat=len(patterns)):
        binding = {}
        ok = True
        for pat, tri in zip(patterns, combo):
            for term, value in zip(pat, tri):
                if K.is_var(term):
                    if binding.setdefault(term, value) != value:
                        ok = False
                        break
                elif term != value:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            rows.add(tuple(sorted(binding.items())))
    return sorted(rows, key=repr)


def _rows(result):
    return sorted((tuple(sorted(r.items())) for r in result), key=repr)


def test_sink_to_oven_preconditions(kb):
    got = [b.condition.local for b in K.conditions_of(kb, SINK_TO_OVEN, "pre")]
    assert set(got) == SINK_TO_OVEN_PRE and len(got) == 5


def test_sink_to_oven_postcondition(kb):
    got = [b.condition.local for b in K.conditions_of(kb, SINK_TO_OVEN, "post")]
    assert got == sorted(SINK_TO_OVEN_POST)


def test_sink_to_oven_binding_details(kb):
    by_name = {b.condition.local: b for b in K.conditions_of(kb, SINK_TO_OVEN, "pre")}
    wt = by_name["Precondition_WT_1_Check_Position_Oven_False"]
    assert wt.checker_url == "http://127.0.0.1:5000/wt/check_position?machine=wt_1&position=oven"
    assert (wt.required_key, wt.required_value) == ("at_position", "false")
    sm = by_name["Precondition_SM_1_Status_Of_Light_Barrier_6_Interrupted_True"]
    assert sm.checker_url.endswith("/sm/status_of_light_barrier?machine=sm_1&lb=6")


def test_unknown_url_has_no_conditions(kb):
    assert K.conditions_of(kb, "http://127.0.0.1:5000/nope?machine=x") == []


def test_descendants(kb):
    assert len(K.descendants(kb, K.Iri("ServiceVGRPickUpAndTransport"))) == 72
    assert len(K.descendants(kb, K.SERVICE_CLASS)) == 341
    leaf = K.Iri("Service_VGR_Pick_Up_And_Transport_VGR_1_Start_Sink_1_End_Oven")
    assert K.descendants(kb, leaf) == []


def test_default_kb_is_consistent(kb):
    assert K.validate(kb) == []


def test_validate_flags_missing_key(kb):
    broken = K.KnowledgeBase(t for t in kb if not (t.predicate == K.REQUIRED_KEY and "OV_1_State" in t.subject))
    kinds = {v.kind for v in K.validate(broken)}
    assert kinds


def test_validate_flags_unknown_predicate(kb):
    extra = K.KnowledgeBase(list(kb))
    extra.add(K.Triple(K.Iri("a"), K.Iri("notAProperty"), K.Iri("b")))
    assert any(v.subject.endswith("a") or "notAProperty" in v.detail for v in K.validate(extra))


def test_round_trip_is_identity(kb):
    text = K.dump_triples(kb)
    again = K.load_triples(text)
    assert set(again) == set(kb)
    assert K.dump_triples(again) == text


def test_parse_error_reports_line():
    good = f"<{K.NS}a>\t<{K.NS}hasURL>\t\"x\"^^<http://www.w3.org/2001/XMLSchema#string>\n"
    with pytest.raises(K.TripleParseError) as err:
        K.load_triples(good + "garbage\n")
    assert err.value.lineno == 2


def test_unavailable_empty_fault_set(kb):
    assert K.unavailable_services(kb, []) == []


def test_unavailable_unknown_machine(kb):
    with pytest.raises(K.UnknownResource):
        K.unavailable_services(kb, ["zz_9"])


def test_unavailable_matches_brute_force(cat, kb):
    expected = sorted(
        s.url
        for s in cat.services.values()
        if s.provider == "ov_1"
        or any(
            b.required_key == "state"
            and b.required_value == "ready"
            and K.url_params(b.checker_url).get("machine") == "ov_1"
            for b in s.preconditions
        )
    )
    got = K.unavailable_services(kb, ["ov_1"])
    assert got == expected
    assert SINK_TO_OVEN in got
    assert sum("/ov/burn" in u for u in got) == 2


def test_rdf_xml_mentions_every_condition(kb):
    xml = K.to_rdf_xml(kb, K.Iri("Service_VGR_Pick_Up_And_Transport_VGR_1_Start_Sink_1_End_Oven"))
    for name in SINK_TO_OVEN_PRE | SINK_TO_OVEN_POST:
        assert name in xml


# -- property: indexed join agrees with the brute-force oracle ---------------

_NAMES = [K.Iri(x) for x in ("a", "b", "c", "d")]
_PREDS = [K.HAS_URL, K.HAS_PRECONDITION, K.TYPE]
_terms = st.sampled_from(_NAMES + [K.Literal("1", "integer")])
_triples = st.builds(K.Triple, st.sampled_from(_NAMES), st.sampled_from(_PREDS), _terms)
_slot = st.one_of(st.sampled_from(["?x", "?y", "?z"]), _terms)
_patterns = st.lists(
    st.tuples(st.one_of(st.sampled_from(["?x", "?y"]), st.sampled_from(_NAMES)), st.sampled_from(_PREDS), _slot),
    min_size=1,
    max_size=3,
)


@settings(max_examples=150, deadline=None)
@given(st.lists(_triples, max_size=10), _patterns)
def test_match_agrees_with_naive_join(triples, patterns):
    store = K.KnowledgeBase(triples)
    assert _rows(store.match(patterns)) == naive_match(set(triples), patterns)


@settings(max_examples=50, deadline=None)
@given(st.lists(_triples, max_size=12))
def test_dump_load_round_trip(triples):
    store = K.KnowledgeBase(triples)
    assert set(K.load_triples(K.dump_triples(store))) == set(triples)
