"""Post-hoc verification of recorded traces.

A property suite is a JSON list of objects ``{"name", "kind", ...}`` where
``kind`` is one of:

``pointwise-expression``
    ``expr`` must evaluate true at the worlds selected by ``at``: ``"seal"``,
    ``"every-world"`` (default) or a list of ``[t, n]`` pairs.
``ordering``
    ``check`` names a structural check: ``receive_execute_send``,
    ``phase_order``, ``one_move_per_round``, ``periodic_exactness`` or
    ``world_bounds``.
``conservation``
    ``check`` is ``move``, ``receive_input``, ``send_output``, ``finalize``
    or ``init_data_ports``.
``oracle-equivalence``
    compares engine timeout firings with :func:`timeout_oracle`; ``timeout``
    is ``"thread:id"`` or ``"all"``.

Checks replay the trace entry by entry and never call back into the engine.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from . import expr as ex
from .temporal import Mark, Trace, Write, event_occurrences, eval as trace_eval
from .timeout import TimeoutDecl, sampled_duration
from .rts import DispatchStatus
from .values import ORIGIN, PortQueue, Time, to_json, value_key

KINDS = ("pointwise-expression", "ordering", "conservation", "oracle-equivalence")
ORDERING_CHECKS = ("receive_execute_send", "phase_order", "one_move_per_round",
                   "periodic_exactness", "world_bounds")
CONSERVATION_CHECKS = ("move", "receive_input", "send_output", "finalize", "init_data_ports")
BUILTIN_SUITES = ("rules", "director", "timeouts")


class SuiteError(Exception):
    pass


@dataclass
class Result:
    name: str
    kind: str
    passed: bool
    message: str = ""
    world: Time | None = None
    neighborhood: list = field(default_factory=list)

    def to_json(self):
        out = {"name": self.name, "kind": self.kind, "passed": self.passed}
        if not self.passed:
            out["message"] = self.message
            out["world"] = list(self.world) if self.world is not None else None
            out["neighborhood"] = self.neighborhood
        return out


@dataclass
class Report:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self):
        return {"passed": self.passed, "results": [r.to_json() for r in self.results]}

    def format_text(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name} ({r.kind})")
            if not r.passed:
                where = f" at world {tuple(r.world)}" if r.world is not None else ""
                lines.append(f"      {r.message}{where}")
                lines.extend(f"      | {x}" for x in r.neighborhood)
        n_ok = sum(r.passed for r in self.results)
        lines.append(f"{n_ok}/{len(self.results)} properties hold")
        return "\n".join(lines)


class _Violation(Exception):
    def __init__(self, message, index=None, world=None):
        super().__init__(message)
        self.index = index
        self.world = world


# -- suites ------------------------------------------------------------------------

def builtin_suite(name: str) -> list:
    if name == "all":
        return [p for n in BUILTIN_SUITES for p in builtin_suite(n)]
    if name not in BUILTIN_SUITES:
        raise SuiteError(f"no built-in suite {name!r}; have {', '.join(BUILTIN_SUITES)}, all")
    text = resources.files("aadl_rts").joinpath("suites", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def load_suite(ref: str) -> list:
    """A suite from ``builtin:<name>`` or a JSON file path."""
    if ref.startswith("builtin:"):
        return builtin_suite(ref[len("builtin:"):])
    try:
        with open(ref, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SuiteError(f"{ref}: line {e.lineno}: {e.msg}") from None


def validate_suite(suite, trace: Trace):
    if not isinstance(suite, list):
        raise SuiteError("a property suite is a JSON list")
    known = trace.variables()
    for i, p in enumerate(suite):
        if not isinstance(p, dict) or "name" not in p or "kind" not in p:
            raise SuiteError(f"property {i} needs 'name' and 'kind'")
        if p["kind"] not in KINDS:
            raise SuiteError(f"property {p['name']!r}: unknown kind {p['kind']!r}")
        if p["kind"] == "pointwise-expression":
            try:
                tree = ex.parse(p["expr"])
            except (KeyError, ex.ExprSyntaxError) as e:
                raise SuiteError(f"property {p['name']!r}: {e}") from None
            missing = ex.names(tree) - known
            if missing:
                raise SuiteError(f"property {p['name']!r}: variables not in trace {sorted(missing)}")
        elif p["kind"] == "ordering" and p.get("check") not in ORDERING_CHECKS:
            raise SuiteError(f"property {p['name']!r}: check must be one of {ORDERING_CHECKS}")
        elif p["kind"] == "conservation" and p.get("check") not in CONSERVATION_CHECKS:
            raise SuiteError(f"property {p['name']!r}: check must be one of {CONSERVATION_CHECKS}")


def check_suite(trace: Trace, suite) -> Report:
    """Evaluate every property of ``suite`` over a sealed trace."""
    if trace.seal is None:
        raise SuiteError("trace is not sealed")
    validate_suite(suite, trace)
    lines = None
    results = []
    for p in suite:
        try:
            _run(trace, p)
            results.append(Result(p["name"], p["kind"], True))
        except _Violation as v:
            if lines is None:
                lines = list(trace.lines())
            hood = []
            if v.index is not None:
                # line 0 is the header
                lo, hi = max(1, v.index + 1 - 3), min(len(lines), v.index + 1 + 4)
                hood = lines[lo:hi]
            results.append(Result(p["name"], p["kind"], False, str(v), v.world, hood))
    return Report(results)


def _run(trace, p):
    kind = p["kind"]
    if kind == "pointwise-expression":
        _pointwise(trace, p)
    elif kind == "oracle-equivalence":
        _oracle_equivalence(trace, p.get("timeout", "all"))
    else:
        CHECKS[p["check"]](trace)


def _pointwise(trace, p):
    at = p.get("at", "every-world")
    if at == "seal":
        worlds = [trace.seal]
    elif at == "every-world":
        worlds = trace.worlds()
    else:
        worlds = [Time(*w) for w in at]
    tree = ex.parse(p["expr"])
    for w in worlds:
        try:
            v = trace_eval(trace, tree, w)
        except ex.EvalError as e:
            raise _Violation(f"{p['expr']!r} cannot be evaluated: {e}", _index_of(trace, w), w)
        if v is not True:
            raise _Violation(f"{p['expr']!r} is {v!r}", _index_of(trace, w), w)


def _index_of(trace, w):
    for i, e in enumerate(trace.entries):
        if e.time >= w:
            return i
    return len(trace.entries) - 1


# -- replay ------------------------------------------------------------------------

class _Replay:
    """Walk the entries, keeping the current value of every variable."""

    def __init__(self, trace):
        self.trace = trace
        self.cur = {}

    def __iter__(self):
        for i, e in enumerate(self.trace.entries):
            if isinstance(e, Write):
                self.cur[e.var] = e.value
            yield i, e

    def thread(self, tid):
        """Snapshot of one thread's tuple, keyed by variable name."""
        return {k: v for k, v in self.cur.items()
                if k.split(":")[1] == tid and k.split(":")[0] in ("IPS", "APS", "Var", "Sts")}


def _same(a, b):
    if isinstance(a, PortQueue) and isinstance(b, PortQueue):
        return a.key() == b.key()
    if isinstance(a, DispatchStatus) or isinstance(b, DispatchStatus):
        return a == b
    return value_key(a) == value_key(b)


def _diff(before: dict, after: dict, allowed=()):
    for k in sorted(set(before) | set(after)):
        if k in allowed:
            continue
        if k not in before or k not in after or not _same(before[k], after[k]):
            return k
    return None


def _var(role, tid, port):
    return f"{role}:{tid}:{port}"


_STAGES = ("dispatch", "receive_input", "compute", "send_output", "complete")


def _may_write(stage, role, direction):
    """Which of a thread's variables the world of ``stage`` may write."""
    if stage == "receive_input":
        return role in ("IPS", "APS") and direction == "in"
    if stage == "compute":
        return role == "Var" or (role == "APS" and direction in ("in", "out"))
    if stage == "send_output":
        return role in ("IPS", "APS") and direction == "out"
    return role == "Sts"


def check_receive_execute_send(trace):
    """Each accepted dispatch: dispatch < receive < compute < send < complete,
    all at one real time, and each world writes only what its stage may."""
    model = trace.model
    open_ = {}
    for i, e in enumerate(trace.entries):
        if isinstance(e, Mark) and "thread" in e.info:
            tid = e.info["thread"]
            if e.mark == "dispatch":
                open_[tid] = [e.time]
            elif e.mark in _STAGES:
                st = open_.get(tid)
                if st is None or _STAGES[len(st)] != e.mark:
                    raise _Violation(f"{e.mark} of {tid!r} out of order", i, e.time)
                if e.time.t != st[-1].t or e.time <= st[-1]:
                    raise _Violation(f"{e.mark} of {tid!r} does not follow {_STAGES[len(st) - 1]} "
                                     "by micro-steps at the same real time", i, e.time)
                st.append(e.time)
                if e.mark == "complete":
                    del open_[tid]
            elif e.mark in ("defer", "fault"):
                open_.pop(tid, None)
        elif isinstance(e, Write):
            role, tid, name = e.var.split(":")
            st = open_.get(tid)
            if st is None or role == "Sch":
                continue
            stage = _STAGES[len(st)]
            port = model.threads[tid].ports.get(name)
            direction = port.direction if port is not None else None
            if not _may_write(stage, role, direction):
                raise _Violation(f"{e.var} written in the {stage} world", i, e.time)
    if open_:
        tid = sorted(open_)[0]
        raise _Violation(f"dispatch of {tid!r} never completed", None, open_[tid][0])


_NEXT_PHASE = {None: ("off",), "off": ("initialize",), "initialize": ("move",),
               "move": ("dispatch", "finalize"), "dispatch": ("compute",),
               "compute": ("move",), "finalize": ("off",)}


def check_phase_order(trace):
    """off, initialize, move, (dispatch, compute, move)*, finalize, off."""
    prev = None
    ended = False
    for i, e in enumerate(trace.entries):
        if not (isinstance(e, Write) and e.var == "Dir:director:phase"):
            continue
        if ended or e.value not in _NEXT_PHASE.get(prev, ()):
            raise _Violation(f"phase {e.value!r} cannot follow {prev!r}", i, e.time)
        ended = prev == "finalize"
        prev = e.value
    if not ended:
        raise _Violation(f"phase sequence ends in {prev!r}", None, trace.seal)


def check_one_move_per_round(trace):
    moves = 0
    started = None
    for i, e in enumerate(trace.entries):
        if not isinstance(e, Mark):
            continue
        if e.mark in ("round", "finalize") and started is not None:
            if moves != 1:
                raise _Violation(f"{moves} moves between the round at {tuple(started)} and the next",
                                 i, e.time)
            started = None
        if e.mark == "round":
            started, moves = e.time, 0
        elif e.mark == "move":
            moves += 1
        if e.mark == "finalize":
            started = None


def check_periodic_exactness(trace):
    model = trace.model
    H = trace.horizon_ns
    for tid in model.thread_ids():
        decl = model.threads[tid]
        if decl.dispatch != "Periodic":
            continue
        halted_at = None
        seen = []
        for i, e in enumerate(trace.entries):
            if isinstance(e, Mark) and e.info.get("thread") == tid:
                if e.mark == "dispatch" and e.info["kind"] == "TimeTriggered":
                    seen.append((i, e.time))
                elif e.mark == "dispatch" and not decl.timeouts:
                    raise _Violation(f"{tid!r} dispatched by {e.info['kind']}", i, e.time)
                elif e.mark == "fault":
                    halted_at = e.time.t
        P = decl.period_ns
        last = min(H, halted_at) if halted_at is not None else H
        want = list(range(0, int(last) + 1, P))
        got = [w.t for _, w in seen]
        if got != want:
            for k, (i, w) in enumerate(seen):
                if k >= len(want) or w.t != want[k]:
                    raise _Violation(f"{tid!r} dispatched at t={w.t}, expected "
                                     f"{want[k] if k < len(want) else 'nothing'}", i, w)
            raise _Violation(f"{tid!r} dispatched {len(got)} times, expected {len(want)}",
                             None, None)


def check_world_bounds(trace):
    for i, e in enumerate(trace.entries):
        if e.time < ORIGIN or e.time > trace.seal:
            raise _Violation(f"entry outside [(0,0), {tuple(trace.seal)}]", i, e.time)
    if trace.header.get("horizon_ns") is not None and trace.seal.t > trace.header["horizon_ns"]:
        raise _Violation("seal beyond the declared horizon", None, trace.seal)


def _items(q):
    # JSON text is bit-exact for the values a trace can hold, and readable in reports
    if q is None:
        return Counter()
    return Counter(f"{json.dumps(to_json(x.value), sort_keys=True)}@({x.ts.t},{x.ts.n})" for x in q)


def check_move_conservation(trace):
    """Per move: values cleared from out IPS, copied once per connection,
    equal the values added to each in IPS; every out IPS ends empty."""
    model = trace.model
    rp = _Replay(trace)
    before = None
    for i, e in rp:
        if isinstance(e, Write) and e.var == "Dir:director:phase" and e.value == "move":
            before = dict(rp.cur)
        elif isinstance(e, Mark) and e.mark == "move":
            after = rp.cur
            expected = {}
            for tid in model.thread_ids():
                for p in model.out_ports(tid):
                    q = before.get(_var("IPS", tid, p.split(".")[1]))
                    if q:
                        for dst in model.conn_dest(p):
                            expected.setdefault(dst, Counter()).update(_items(q))
                    if after.get(_var("IPS", tid, p.split(".")[1])):
                        raise _Violation(f"out IPS {p} not empty after move", i, e.time)
            for tid in model.thread_ids():
                for dst in model.in_ports(tid):
                    v = _var("IPS", tid, dst.split(".")[1])
                    old, new = before.get(v), after.get(v)
                    if model.is_data_port(dst):
                        want = expected.get(dst)
                        if want is not None and _items(new) != want:
                            raise _Violation(f"data port {dst} holds {new!r} after move", i, e.time)
                        if want is None and old is not None and not _same(old, new):
                            raise _Violation(f"data port {dst} changed without a source", i, e.time)
                        continue
                    got = _items(new) - _items(old) if old is not None else _items(new)
                    if old is not None and len(new) != len(old) + sum(got.values()):
                        raise _Violation(f"queue {dst} lost items across move", i, e.time)
                    if got != expected.get(dst, Counter()):
                        raise _Violation(f"{dst} received {dict(got)} but sources sent "
                                         f"{dict(expected.get(dst, Counter()))}", i, e.time)
            before = None


def _frame_check(trace, mark, rule):
    model = trace.model
    rp = _Replay(trace)
    pre = {}
    for i, e in rp:
        if not isinstance(e, Mark) or "thread" not in e.info:
            continue
        tid = e.info["thread"]
        if e.mark == "dispatch":
            pre[tid] = rp.thread(tid)
        elif e.mark == "compute":
            pre[tid] = rp.thread(tid)
        elif e.mark == mark and tid in pre:
            msg = rule(model.threads[tid], pre[tid], rp.thread(tid))
            if msg:
                raise _Violation(f"{mark} of {tid!r}: {msg}", i, e.time)


def _receive_rule(decl, before, after):
    touched = set()
    for p, d in decl.ports.items():
        if d.direction != "in":
            continue
        ips, aps = _var("IPS", decl.id, p), _var("APS", decl.id, p)
        touched |= {ips, aps}
        if not _same(after[aps], before[ips]):
            return f"APS of {p} is not the prior IPS"
        if d.kind == "data":
            if not _same(after[ips], before[ips]):
                return f"data IPS of {p} changed"
        elif after[ips]:
            return f"event IPS of {p} not drained"
    k = _diff(before, after, touched)
    return f"{k} changed" if k else None


def _send_rule(decl, before, after):
    touched = set()
    for p, d in decl.ports.items():
        if d.direction != "out":
            continue
        ips, aps = _var("IPS", decl.id, p), _var("APS", decl.id, p)
        touched |= {ips, aps}
        if not _same(after[ips], before[aps]):
            return f"IPS of {p} is not the prior APS"
        if after[aps]:
            return f"APS of {p} not emptied"
    k = _diff(before, after, touched)
    return f"{k} changed" if k else None


def check_receive_frame(trace):
    # the state before Receive_Input is the one at the dispatch mark
    _frame_check(trace, "receive_input", _receive_rule)


def check_send_frame(trace):
    _frame_check(trace, "send_output", _send_rule)


def check_finalize(trace):
    rp = _Replay(trace)
    pre = {}
    for i, e in rp:
        if isinstance(e, Mark) and e.mark == "finalize":
            pre[e.info["thread"]] = (i, e.time, rp.thread(e.info["thread"]))
    for tid, (i, w, before) in pre.items():
        k = _diff(before, rp.thread(tid))
        if k:
            raise _Violation(f"finalize of {tid!r} changed {k}", i, w)


def check_init_data_ports(trace):
    model = trace.model
    for tid in model.thread_ids():
        for p in model.in_ports(tid):
            if model.is_data_port(p):
                q = trace.at(_var("IPS", tid, p.split(".")[1]), ORIGIN)
                if len(q) != 1:
                    raise _Violation(f"in data port {p} holds {len(q)} values at (0,0)",
                                     _index_of(trace, Time(0, 1)), ORIGIN)


CHECKS = {
    "receive_execute_send": check_receive_execute_send,
    "phase_order": check_phase_order,
    "one_move_per_round": check_one_move_per_round,
    "periodic_exactness": check_periodic_exactness,
    "world_bounds": check_world_bounds,
    "move": check_move_conservation,
    "receive_input": check_receive_frame,
    "send_output": check_send_frame,
    "finalize": check_finalize,
    "init_data_ports": check_init_data_ports,
}


# -- timeouts ----------------------------------------------------------------------

def trace_timeouts(trace: Trace) -> list:
    """Every timeout registered during initialization."""
    out = []
    for m in trace.marks("initialize"):
        for d in m.info.get("timeouts", []):
            out.append(TimeoutDecl(d["id"], m.info["thread"], tuple(d["reset"]),
                                   d.get("duration_ns"), d.get("duration_port")))
    return out


def timeout_oracle(trace: Trace, decl) -> set:
    """Instants where the timeout formula holds, from recorded events alone.

    For each event time e with duration d, e + d is an instant iff it lies
    within the horizon and no event occurs strictly between e and e + d.
    Quadratic in the number of events.
    """
    if isinstance(decl, str):
        found = [d for d in trace_timeouts(trace) if f"{d.owner}:{d.id}" == decl]
        if not found:
            raise SuiteError(f"unknown timeout {decl!r}")
        decl = found[0]
    H = trace.horizon_ns
    events = event_occurrences(trace, decl.owner, decl.reset)
    firsts = {}
    for w, _, _ in events:
        firsts.setdefault(w.t, w)
    times = sorted(firsts)
    out = set()
    for e in times:
        tau = e + sampled_duration(trace, decl, firsts[e])
        if tau > H:
            continue
        if not any(e < x < tau for x in times):
            out.add(Time(tau, 0))
    return out


def engine_firings(trace: Trace, decl: TimeoutDecl) -> set:
    return {m.time for m in trace.marks("timeout")
            if m.info["thread"] == decl.owner and m.info["id"] == decl.id}


def _oracle_equivalence(trace, which):
    decls = trace_timeouts(trace)
    if which != "all":
        decls = [d for d in decls if f"{d.owner}:{d.id}" == which]
        if not decls:
            raise SuiteError(f"unknown timeout {which!r}")
    for d in decls:
        want = timeout_oracle(trace, d)
        got = engine_firings(trace, d)
        if want != got:
            extra, missing = sorted(got - want), sorted(want - got)
            w = (extra + missing)[0]
            raise _Violation(f"timeout {d.owner}:{d.id}: engine fired {[tuple(x) for x in extra]} "
                             f"unexpectedly, missed {[tuple(x) for x in missing]}",
                             _index_of(trace, w), w)
