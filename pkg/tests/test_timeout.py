import pytest

from aadl_rts.checker import engine_firings, timeout_oracle, trace_timeouts
from aadl_rts.model import PortDecl, ThreadDecl
from aadl_rts.rts import EVENT_TRIGGERED, TIME_TRIGGERED, DispatchStatus
from aadl_rts.timeout import (TimeoutDecl, TimeoutSpecError, TimerBank, create_timeout,
                              fire, timeout_active)
from aadl_rts.values import EVENT, PortQueue, Time, TimestampedValue

from builders import run_gallery, synthetic_trace

S = 1_000_000_000


def vvi():
    ports = {"n": PortDecl("n", "v", "event", "out", None, 1),
             "p": PortDecl("p", "v", "event", "out", None, 1),
             "d": PortDecl("d", "v", "data", "in", "Integer", 1),
             "f": PortDecl("f", "v", "data", "in", "Float", 1),
             "s": PortDecl("s", "v", "eventdata", "in", "Integer", 2)}
    return ThreadDecl("v", "Sporadic", None, ports)


def test_create_timeout_names_trigger():
    d = create_timeout(vvi(), ["n", "p"], S, "lrl")
    assert d.id == "timeout_n_p_lrl" and d.reset == ("n", "p") and d.duration_ns == S


def test_create_timeout_fresh_ids():
    a = create_timeout(vvi(), ["n"], 5)
    b = create_timeout(vvi(), ["n"], 5, taken={a.id})
    assert a.id == "timeout_n_5" and b.id == "timeout_n_5_2"
    with pytest.raises(TimeoutSpecError):
        create_timeout(vvi(), ["n"], 5, tid="s")


def test_create_timeout_duration_port():
    d = create_timeout(vvi(), ["s"], "d")
    assert d.duration_port == "d" and d.duration_ns is None
    assert d.to_json() == {"id": "timeout_s_d", "reset": ["s"], "duration_port": "d"}


@pytest.mark.parametrize("reset,duration,kw", [
    ([], 5, {}), (["zz"], 5, {}), (["d"], 5, {}), (["n"], 0, {}), (["n"], -3, {}),
    (["n"], 1.5, {}), (["n"], True, {}), (["n"], "s", {}), (["n"], "f", {}),
    (["n"], 5, {"phase": "compute"}),
])
def test_create_timeout_errors(reset, duration, kw):
    with pytest.raises(TimeoutSpecError):
        create_timeout(vvi(), reset, duration, **kw)


def test_fire_is_union():
    decl = TimeoutDecl("to", "v", ("n",), 5)
    st = fire(decl, DispatchStatus(frozenset({"s"}), EVENT_TRIGGERED))
    assert st.triggers == {"s", "to"} and st.kind == EVENT_TRIGGERED
    st = fire(decl, DispatchStatus(frozenset(), "NotEnabled"))
    assert st.triggers == {"to"} and st.kind == EVENT_TRIGGERED
    assert fire(decl, DispatchStatus(frozenset(), TIME_TRIGGERED)).kind == TIME_TRIGGERED


def events_trace(stamps, horizon):
    writes = [(0, 0, "IPS:t:A", PortQueue((), 4))]
    for s in stamps:
        writes.append((s, 1, "IPS:t:A", PortQueue((TimestampedValue(EVENT, Time(s, 1)),), 4)))
        writes.append((s, 2, "IPS:t:A", PortQueue((), 4)))
    return synthetic_trace(writes, horizon)


DECL = TimeoutDecl("to", "t", ("A",), 2 * S)


def test_timeout_after_one_event():
    tr = events_trace([1 * S], 10 * S)
    assert timeout_active(tr, DECL, Time(3 * S, 0))
    assert not timeout_active(tr, DECL, Time(3 * S - 1, 0))
    assert timeout_oracle(tr, DECL) == {Time(3 * S, 0)}


def test_intervening_event_postpones():
    tr = events_trace([1 * S, 5 * S // 2], 10 * S)
    assert not timeout_active(tr, DECL, Time(3 * S, 0))
    assert timeout_active(tr, DECL, Time(9 * S // 2, 0))
    assert timeout_oracle(tr, DECL) == {Time(9 * S // 2, 0)}


def test_no_events_never_fires():
    tr = events_trace([], 10 * S)
    assert not any(timeout_active(tr, DECL, Time(k * S // 4, 0)) for k in range(41))
    assert timeout_oracle(tr, DECL) == set()


def test_expiry_past_horizon_is_dropped():
    assert timeout_oracle(events_trace([9 * S], 10 * S), DECL) == set()


def test_timer_bank():
    a = TimeoutDecl("x", "v", ("n", "p"), 5)
    b = TimeoutDecl("y", "w", ("n",), 7)
    bank = TimerBank([a, b])
    assert bank.watching("v", "p") == [a] and bank.watching("w", "p") == []
    bank.arm(a, 10, 5)
    bank.arm(b, 9, 7)
    assert bank.next_expiry() == 15
    bank.arm(a, 12, 5)  # re-arming replaces the pending expiry
    assert bank.pop_due(15) == []
    assert bank.pop_due(16) == [b]
    assert bank.pop_due(17) == [a]
    assert bank.next_expiry() is None


@pytest.mark.parametrize("name", ["pacemaker", "pipeline"])
def test_engine_matches_oracle_on_gallery(name):
    tr = run_gallery(name)
    decls = trace_timeouts(tr)
    assert decls
    for d in decls:
        assert engine_firings(tr, d) == timeout_oracle(tr, d)


def test_pacemaker_firings():
    tr = run_gallery("pacemaker")
    got = sorted(x.t for x in timeout_oracle(tr, "vvi:timeout_n_p_lrl"))
    assert got == [k * S // 10 for k in (33, 43, 53, 79, 89, 99)]
