import pytest

from aadl_rts.behavior import BehaviorError, BehaviorSpec, holds, parse_condition
from aadl_rts.rts import (EVENT_TRIGGERED, TIME_TRIGGERED, DispatchStatus, ThreadState,
                          compute_entrypoint, initialize_entrypoint)
from aadl_rts.model import PortDecl, ThreadDecl
from aadl_rts.values import make_queue


def ev(*ids):
    return DispatchStatus(frozenset(ids), EVENT_TRIGGERED)


@pytest.mark.parametrize("text,tree", [
    ("on dispatch", ("any",)),
    ("on dispatch A", ("trig", "A")),
    ("on dispatch A and B or C", ("or", ("and", ("trig", "A"), ("trig", "B")), ("trig", "C"))),
    ("A and (B or C)", ("and", ("trig", "A"), ("or", ("trig", "B"), ("trig", "C")))),
    ("not timetriggered", ("not", ("time",))),
    ("on dispatch TimeTriggered", ("time",)),
    ("timeout_n_p_lrl", ("trig", "timeout_n_p_lrl")),
])
def test_parse_condition(text, tree):
    assert parse_condition(text) == tree


@pytest.mark.parametrize("text", ["", "A and", "(A", "A B", "A or or B", "A + B", ")"])
def test_bad_conditions(text):
    with pytest.raises(BehaviorError):
        parse_condition(text)


@pytest.mark.parametrize("text,status,expected", [
    ("A and B", ev("A"), False),
    ("A and B", ev("A", "B"), True),
    ("A or B", ev("B"), True),
    ("not A", ev("B"), True),
    ("timetriggered", DispatchStatus(frozenset(), TIME_TRIGGERED), True),
    ("timetriggered", ev("A"), False),
    ("on dispatch", ev("Z"), True),
])
def test_holds(text, status, expected):
    assert holds(parse_condition(text), status) is expected


def spec(obj):
    return BehaviorSpec.from_json(obj)


def test_first_enabled_transition_in_declaration_order_wins():
    b = spec({"states": ["s", "a", "b"], "transitions": [
        {"from": "s", "to": "a", "when": "on dispatch x"},
        {"from": "s", "to": "b", "when": "on dispatch x or y"}]})
    assert b.select({"$state": "s"}, ev("x")).target == "a"
    assert b.select({"$state": "s"}, ev("y")).target == "b"
    assert b.select({"$state": "a"}, ev("x")) is None


def test_empty_behavior_accepts_everything():
    b = BehaviorSpec()
    tr = b.select({}, ev("q"))
    assert tr is not None and tr.actions == ()


@pytest.mark.parametrize("obj", [
    [], {"states": []}, {"states": ["a", "a"]}, {"initial": "zz"}, {"bogus": 1},
    {"variables": {"1x": 0}}, {"transitions": [{"from": "idle"}]},
    {"transitions": [{"from": "idle", "to": "idle", "actions": [{"wat": 1}]}]},
])
def test_spec_errors(obj):
    with pytest.raises(BehaviorError):
        spec(obj)


def test_json_round_trip():
    obj = {"states": ["s", "t"], "initial": "t", "variables": {"n": 1},
           "init_actions": [{"set": "n", "expr": "2"}],
           "transitions": [{"from": "t", "to": "s", "when": "on dispatch i",
                            "actions": [{"set": "n", "expr": "n * 2"}, {"put": "o", "expr": "n"},
                                        {"next": "i"}]}]}
    b = spec(obj)
    assert spec(b.to_json()) == b


def run_spec(b, ports, queues, status):
    ps = {p: PortDecl(p, "t", k, d, None if k == "event" else "Integer", 4 if k == "eventdata" else 1)
          for p, k, d in ports}
    s = initialize_entrypoint(ThreadState.initial(ThreadDecl("t", "Sporadic", None, ps, b)), b)
    for p, vals in queues.items():
        s.ips_in[p] = make_queue(vals, 4)
    return compute_entrypoint(s, status, b)


def test_actions_run_against_frozen_inputs():
    b = spec({"variables": {"total": 0, "seen": 0}, "transitions": [
        {"from": "idle", "to": "idle", "when": "on dispatch i", "actions": [
            {"set": "total", "expr": "total + head(i)"}, {"next": "i"},
            {"set": "total", "expr": "total + head(i)"},
            {"set": "seen", "expr": "count(i)"},
            {"put": "o", "expr": "total"}]}]})
    s, ok = run_spec(b, [("i", "eventdata", "in"), ("o", "eventdata", "out")],
                     {"i": [3, 4]}, ev("i"))
    assert ok and s.vars["total"] == 7 and s.vars["seen"] == 1
    assert s.ips_out["o"].values == [7]


def test_emit_and_updated():
    b = spec({"variables": {"u": False}, "transitions": [
        {"from": "idle", "to": "idle", "actions": [
            {"set": "u", "expr": "updated(d)"}, {"emit": "e"}]}]})
    ports = [("d", "data", "in"), ("e", "event", "out"), ("k", "event", "in")]
    s, ok = run_spec(b, ports, {"d": [5]}, ev("k"))
    assert ok and s.vars["u"] is True and len(s.ips_out["e"]) == 1


def test_init_actions_can_put_data_defaults():
    b = spec({"init_actions": [{"put": "d", "expr": "9"}]})
    ps = {"d": PortDecl("d", "t", "data", "out", "Integer", 1)}
    s = initialize_entrypoint(ThreadState.initial(ThreadDecl("t", "Sporadic", None, ps, b)), b)
    assert s.ips_out["d"].values == [9]
