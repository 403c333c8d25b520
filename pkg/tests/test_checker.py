import json

import pytest

from aadl_rts.checker import (SuiteError, builtin_suite, check_suite, load_suite,
                              timeout_oracle)
from aadl_rts.cli import gallery_file
from aadl_rts.director import simulate
from aadl_rts.temporal import Trace, TraceRecorder

from builders import model, port, run_gallery, thread

ALL = builtin_suite("all")


def small_trace():
    m = model([thread("p", "periodic", [port("o", "eventdata", "out"), port("d", "data", "out")],
                      period_ns=10,
                      behavior={"variables": {"n": 0}, "transitions": [
                          {"from": "idle", "to": "idle", "actions": [
                              {"set": "n", "expr": "n + 1"}, {"put": "o", "expr": "n"},
                              {"put": "d", "expr": "n"}]}]}),
               thread("s", ports=[port("i", "eventdata", "in", q=2), port("d", "data", "in")])],
              [("p.o", "s.i"), ("p.d", "s.d")])
    return simulate(m, horizon_ns=10)


def records(tr):
    return [json.loads(x) for x in tr.lines()]


def rebuild(recs):
    return Trace.from_lines([json.dumps(r, sort_keys=True, separators=(",", ":")) for r in recs])


def find(recs, **match):
    for i, r in enumerate(recs):
        if all(r.get(k) == v for k, v in match.items()):
            return i
    raise LookupError(match)


def failing(tr):
    rep = check_suite(tr, ALL)
    return {r.name for r in rep.results if not r.passed}


def test_clean_traces_pass_every_builtin_check():
    for tr in (small_trace(), run_gallery("pacemaker"), run_gallery("pipeline"),
               run_gallery("ab_deferred")):
        rep = check_suite(tr, ALL)
        assert rep.passed, rep.format_text()
        assert len(rep.results) == 11


def corrupt_phase(recs):
    del recs[find(recs, var="Dir:director:phase", val="compute")]


def corrupt_moves(recs):
    del recs[find(recs, mark="move", n=7, t=0)]


def corrupt_periodic(recs):
    i = find(recs, mark="dispatch", thread="p", t=10)
    recs[i]["kind"] = "EventTriggered"


def corrupt_bounds(recs):
    recs[-1]["seal"] = [10, 3]


def corrupt_move_values(recs):
    i = find(recs, var="IPS:s:i", n=7, t=0)
    recs[i]["val"][0]["v"] = 99


def corrupt_receive(recs):
    i = find(recs, var="APS:s:i", t=0, n=11)
    recs[i]["val"][0]["v"] = 99


def corrupt_send(recs):
    i = find(recs, var="IPS:p:o", n=5, t=0)
    recs[i]["val"][0]["v"] = 99


def corrupt_stage_write(recs):
    i = find(recs, mark="receive_input", thread="p", t=0)
    recs.insert(i, {"n": 3, "t": 0, "var": "Var:p:n", "val": 5})


def corrupt_finalize(recs):
    i = find(recs, mark="finalize", thread="p")
    r = recs[i]
    recs.insert(i + 1, {"n": r["n"], "t": r["t"], "var": "Var:p:n", "val": 77})


def corrupt_init(recs):
    i = find(recs, var="IPS:s:d", t=0, n=0, val=[{"ts": [0, 0], "v": 0}])
    recs[i]["val"] = []


@pytest.mark.parametrize("corrupt,name", [
    (corrupt_phase, "phase order"),
    (corrupt_moves, "one move per round"),
    (corrupt_periodic, "periodic exactness"),
    (corrupt_bounds, "worlds within the horizon"),
    (corrupt_move_values, "move conservation"),
    (corrupt_receive, "receive_input frame"),
    (corrupt_send, "send_output frame"),
    (corrupt_stage_write, "receive-execute-send ordering"),
    (corrupt_finalize, "finalize is the identity"),
    (corrupt_init, "in data ports initialized"),
])
def test_each_corruption_is_caught(corrupt, name):
    recs = records(small_trace())
    corrupt(recs)
    assert name in failing(rebuild(recs))


def test_dropped_timeout_firing_is_caught():
    recs = records(run_gallery("pacemaker"))
    del recs[find(recs, mark="timeout")]
    rep = check_suite(rebuild(recs), builtin_suite("timeouts"))
    assert not rep.passed
    assert "missed [(3300000000, 0)]" in rep.results[0].message


def test_counterexample_has_world_and_neighborhood():
    tr = small_trace()
    suite = [{"name": "n stays small", "kind": "pointwise-expression", "expr": "Var:p:n < 2"}]
    rep = check_suite(tr, suite)
    r = rep.results[0]
    assert not r.passed and r.world == (10, 4)
    assert any('"Var:p:n"' in line for line in r.neighborhood)
    assert 1 <= len(r.neighborhood) <= 7
    out = rep.to_json()
    assert out["passed"] is False and out["results"][0]["world"] == [10, 4]
    assert "FAIL  n stays small" in rep.format_text()


def test_pointwise_at_listed_worlds():
    tr = small_trace()
    suite = [{"name": "n", "kind": "pointwise-expression", "at": [[0, 3], [0, 4]],
              "expr": "Var:p:n@(0,3) = 0 and Var:p:n = 1 or Var:p:n = 0"}]
    assert check_suite(tr, suite).passed


def test_gallery_props_hold():
    for name in ("ab_deferred", "pacemaker", "pipeline"):
        suite = load_suite(str(gallery_file(name, ".props.json")))
        rep = check_suite(run_gallery(name), suite)
        assert rep.passed, rep.format_text()


@pytest.mark.parametrize("suite,needle", [
    ({}, "JSON list"),
    ([{"name": "x"}], "needs 'name' and 'kind'"),
    ([{"name": "x", "kind": "vibes"}], "unknown kind"),
    ([{"name": "x", "kind": "pointwise-expression", "expr": "1 +"}], "'x'"),
    ([{"name": "x", "kind": "pointwise-expression", "expr": "Var:p:zz = 1"}], "not in trace"),
    ([{"name": "x", "kind": "ordering", "check": "move"}], "check must be"),
    ([{"name": "x", "kind": "conservation", "check": "phase_order"}], "check must be"),
])
def test_suite_errors(suite, needle):
    with pytest.raises(SuiteError, match=needle):
        check_suite(small_trace(), suite)


def test_unknown_timeout_and_builtin():
    tr = run_gallery("pacemaker")
    with pytest.raises(SuiteError):
        timeout_oracle(tr, "vvi:nope")
    with pytest.raises(SuiteError):
        check_suite(tr, [{"name": "t", "kind": "oracle-equivalence", "timeout": "x:y"}])
    with pytest.raises(SuiteError, match="no built-in suite"):
        load_suite("builtin:bogus")


def test_unsealed_trace_is_refused():
    rec = TraceRecorder({"format": "aadl-rts-trace", "version": 1, "horizon_ns": 5})
    with pytest.raises(SuiteError, match="not sealed"):
        check_suite(rec.trace, [])


def test_bad_suite_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("[{")
    with pytest.raises(SuiteError, match="line 1"):
        load_suite(str(p))
