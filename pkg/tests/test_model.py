import json

import pytest
from hypothesis import given, settings, strategies as st

from aadl_rts.model import (ModelError, ModelSyntaxError, ValidationError, model_from_json,
                            parse_model, serialize_model)

from builders import gallery, model, port, thread


def two_threads(conn_kind="eventdata", **sink_extra):
    return {"threads": [thread("a", "periodic", [port("o", conn_kind, "out")], period_ns=10),
                        thread("b", "sporadic", [port("i", conn_kind, "in", q=2)], **sink_extra)],
            "connections": [["a.o", "b.i"]]}


def test_two_thread_model():
    m = model_from_json(two_threads())
    assert len(m.threads) == 2 and len(m.connections) == 1


def reason(obj):
    with pytest.raises(ValidationError) as e:
        model_from_json(obj)
    return str(e.value)


def test_connection_from_in_port():
    obj = two_threads()
    obj["connections"] = [["b.i", "a.o"]]
    assert "connection source must be out" in reason(obj)


def test_data_port_queue_size():
    obj = {"threads": [thread("a", ports=[port("d", "data", "in", q=4)])]}
    msg = reason(obj)
    assert "data port queue size must be 1" in msg and "a.d" in msg


@pytest.mark.parametrize("mutate,needle", [
    (lambda o: o["connections"].append(["a.o", "b.nope"]), "not a declared port"),
    (lambda o: o["connections"].__setitem__(0, ["a.o", "a.o"]), "destination must be in"),
    (lambda o: o["threads"][1]["ports"].__setitem__(0, port("i", "event", "in")), "kind"),
    (lambda o: o["threads"][0].__setitem__("period_ns", 0), "period_ns > 0"),
    (lambda o: o["threads"][1].__setitem__("period_ns", 5), "no period"),
    (lambda o: o["threads"][1].__setitem__("dispatch", "aperiodic"), "dispatch must be"),
    (lambda o: o["threads"].append(thread("a")), "duplicate thread"),
    (lambda o: o["threads"][0]["ports"].append(port("o", "event", "out")), "duplicate port"),
    (lambda o: o["threads"][0]["ports"].append(port("x", "eventdata", "out", "Widget")), "unknown value type"),
    (lambda o: o.__setitem__("extra", 1), "unknown top-level"),
    (lambda o: o["connections"].append(["a.o", "b.i"]), "duplicate connection"),
])
def test_validation_errors(mutate, needle):
    obj = two_threads()
    mutate(obj)
    assert needle in reason(obj)


def test_connection_between_ports_of_one_thread():
    obj = {"threads": [thread("a", ports=[port("o", "event", "out"), port("i", "event", "in")])],
           "connections": [["a.o", "a.i"]]}
    assert "different threads" in reason(obj)


def test_in_data_port_needs_exactly_one_source():
    lone = {"threads": [thread("b", ports=[port("d", "data", "in")])]}
    assert "exactly one incoming connection" in reason(lone)
    obj = {"threads": [thread("a", "periodic", [port("d", "data", "out")], period_ns=1),
                       thread("c", "periodic", [port("d", "data", "out")], period_ns=1),
                       thread("b", ports=[port("d", "data", "in")])],
           "connections": [["a.d", "b.d"], ["c.d", "b.d"]]}
    assert "exactly one incoming connection" in reason(obj)


def test_syntax_error_reports_position():
    with pytest.raises(ModelSyntaxError) as e:
        parse_model('{"threads": [\n  {"id": }]}')
    assert e.value.line == 2 and e.value.column == 10


def test_helper_queries():
    m = model([thread("t", ports=[port("A", "event", "in"), port("B", "data", "out")]),
               thread("u", ports=[port("B", "data", "in")]),
               thread("v", ports=[port("B", "data", "in")]),
               thread("w")],
              [("t.B", "u.B"), ("t.B", "v.B")])
    assert m.port_kind("t.B") == "data" and m.is_data_port("t.B")
    assert m.in_ports("t") == ("t.A",) and m.out_ports("t") == ("t.B",)
    assert m.in_ports("w") == () and m.out_ports("w") == ()
    assert set(m.conn_dest("t.B")) == {"u.B", "v.B"}
    assert m.conn_sources("u.B") == ("t.B",)
    for bad in (lambda: m.port_kind("t.Z"), lambda: m.in_ports("zz"),
                lambda: m.conn_dest("u.B"), lambda: m.dispatch_protocol("zz")):
        with pytest.raises(ModelError):
            bad()


def test_unconnected_out_port_has_no_destinations():
    m = model([thread("t", ports=[port("o", "eventdata", "out")])])
    assert m.conn_dest("t.o") == ()


def test_dispatch_protocols():
    m = model([thread("p", "periodic", period_ns=5), thread("s", "Sporadic"),
               thread("x", "TIMED", period_ns=7)])
    assert [m.dispatch_protocol(t) for t in "psx"] == ["Periodic", "Sporadic", "Timed"]


def test_properties_preserved_and_round_trip():
    obj = two_threads()
    obj["threads"][0]["properties"] = {"Priority": 3, "Deadline": "5 ms"}
    obj["threads"][0]["ports"][0]["properties"] = {"Urgency": 1.5}
    m = model_from_json(obj)
    assert m.threads["a"].properties == {"Priority": 3, "Deadline": "5 ms"}
    back = parse_model(serialize_model(m))
    assert serialize_model(back) == serialize_model(m)
    assert back.digest() == m.digest()


@pytest.mark.parametrize("name", ["ab_deferred", "pacemaker", "pipeline"])
def test_gallery_round_trip(name):
    m = gallery(name)[0]
    assert serialize_model(parse_model(serialize_model(m))) == serialize_model(m)


@pytest.mark.parametrize("behavior,needle", [
    ({"transitions": [{"from": "idle", "to": "idle", "when": "on dispatch Q"}]}, "undeclared triggers"),
    ({"transitions": [{"from": "idle", "to": "idle", "actions": [{"set": "z", "expr": "1"}]}]}, "undeclared variable"),
    ({"transitions": [{"from": "idle", "to": "idle", "actions": [{"emit": "i"}]}]}, "not an out port"),
    ({"transitions": [{"from": "idle", "to": "idle", "actions": [{"put": "o", "expr": "1"}]}]}, "emit"),
    ({"variables": {"i": 0}}, "clash"),
    ({"transitions": [{"from": "idle", "to": "nowhere"}]}, "not declared"),
    ({"variables": {"x": 0}, "transitions": [{"from": "idle", "to": "idle",
                                              "actions": [{"set": "x", "expr": "y + 1"}]}]}, "unknown names"),
])
def test_behavior_validation(behavior, needle):
    obj = {"threads": [thread("t", ports=[port("i", "event", "in"), port("o", "event", "out")],
                              behavior=behavior)]}
    assert needle in reason(obj)


def test_timeouts_in_model():
    obj = {"threads": [thread("v", ports=[port("n", "event", "out"), port("p", "event", "out")],
                              timeout={"reset": ["n", "p"], "duration_ns": 10, "name": "lrl"})]}
    m = model_from_json(obj)
    assert [t.id for t in m.threads["v"].timeouts] == ["timeout_n_p_lrl"]
    bad = json.loads(json.dumps(obj))
    bad["threads"][0]["timeout"]["duration_ns"] = 0
    assert "positive" in reason(bad)


# -- totality: every malformed input is diagnosed -----------------------------------

junk = st.recursive(st.one_of(st.none(), st.booleans(), st.integers(-2, 3), st.sampled_from(
    ["a", "in", "out", "data", "event", "eventdata", "periodic", "Integer", "a.o", "b.i"])),
    lambda inner: st.one_of(st.lists(inner, max_size=3),
                            st.dictionaries(st.sampled_from(
                                ["threads", "connections", "id", "ports", "kind", "dir", "type",
                                 "dispatch", "period_ns", "queueSize", "behavior"]), inner,
                                max_size=4)),
    max_leaves=12)


@settings(max_examples=300)
@given(junk)
def test_validation_is_total(obj):
    try:
        m = model_from_json(obj)
    except ModelError:
        return
    assert serialize_model(parse_model(serialize_model(m))) == serialize_model(m)
