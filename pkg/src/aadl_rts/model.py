"""Static instance model: threads, ports and connections.

Model files are UTF-8 JSON::

    {"threads": [{"id": "producer", "dispatch": "periodic", "period_ns": 10000000,
                  "ports": [{"id": "out", "kind": "eventdata", "dir": "out",
                             "type": "Integer", "queueSize": 1}],
                  "behavior": {...},
                  "timeouts": [{"id": "...", "reset": ["out"], "duration_ns": 5}]}],
     "connections": [["producer.out", "consumer.inp"]]}

Ports are addressed globally as ``thread.port``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .behavior import STATE_VAR, BehaviorError, BehaviorSpec, condition_triggers
from . import expr as ex
from .timeout import TimeoutSpecError, create_timeout
from .values import ValueTypeError, normalize_type

PROTOCOLS = {"periodic": "Periodic", "sporadic": "Sporadic", "timed": "Timed"}
KINDS = ("data", "event", "eventdata")
DIRECTIONS = ("in", "out")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ModelError(Exception):
    pass


class ModelSyntaxError(ModelError):
    def __init__(self, message, line=None, column=None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"syntax error{where}: {message}")
        self.line = line
        self.column = column


class ValidationError(ModelError):
    def __init__(self, message, element=None):
        super().__init__(f"{element}: {message}" if element else message)
        self.element = element
        self.reason = message


@dataclass(frozen=True)
class PortDecl:
    id: str
    thread: str
    kind: str
    direction: str
    vtype: object = None
    queue_size: int = 1
    properties: dict = field(default_factory=dict)

    @property
    def qid(self):
        return f"{self.thread}.{self.id}"

    def to_json(self):
        out = {"id": self.id, "kind": self.kind, "dir": self.direction}
        if self.vtype is not None:
            out["type"] = self.vtype
        out["queueSize"] = self.queue_size
        if self.properties:
            out["properties"] = self.properties
        return out


@dataclass(frozen=True)
class ThreadDecl:
    id: str
    dispatch: str
    period_ns: int | None
    ports: dict
    behavior: BehaviorSpec = BehaviorSpec()
    timeouts: tuple = ()
    properties: dict = field(default_factory=dict)

    def to_json(self):
        out = {"id": self.id, "dispatch": self.dispatch.lower()}
        if self.period_ns is not None:
            out["period_ns"] = self.period_ns
        out["ports"] = [p.to_json() for p in self.ports.values()]
        out["behavior"] = self.behavior.to_json()
        if self.timeouts:
            out["timeouts"] = [t.to_json() for t in self.timeouts]
        if self.properties:
            out["properties"] = self.properties
        return out


class Connection(NamedTuple):
    src: str
    dst: str


@dataclass(frozen=True)
class InstanceModel:
    threads: dict
    connections: tuple = ()

    def __post_init__(self):
        ports = {}
        for t in self.threads.values():
            for p in t.ports.values():
                ports[p.qid] = p
        dests, srcs = {}, {}
        for c in self.connections:
            dests.setdefault(c.src, []).append(c.dst)
            srcs.setdefault(c.dst, []).append(c.src)
        object.__setattr__(self, "_ports", ports)
        object.__setattr__(self, "_dests", dests)
        object.__setattr__(self, "_srcs", srcs)

    # helper methods

    def port(self, p: str) -> PortDecl:
        try:
            return self._ports[p]
        except KeyError:
            raise ModelError(f"unknown port {p!r}") from None

    def thread(self, t: str) -> ThreadDecl:
        try:
            return self.threads[t]
        except KeyError:
            raise ModelError(f"unknown thread {t!r}") from None

    def port_kind(self, p: str) -> str:
        return self.port(p).kind

    def is_data_port(self, p: str) -> bool:
        return self.port_kind(p) == "data"

    def port_direction(self, p: str) -> str:
        return self.port(p).direction

    def is_in_port(self, p: str) -> bool:
        return self.port_direction(p) == "in"

    def is_out_port(self, p: str) -> bool:
        return self.port_direction(p) == "out"

    def in_ports(self, t: str) -> tuple:
        return tuple(p.qid for p in self.thread(t).ports.values() if p.direction == "in")

    def out_ports(self, t: str) -> tuple:
        return tuple(p.qid for p in self.thread(t).ports.values() if p.direction == "out")

    def conn_dest(self, p: str) -> tuple:
        if not self.is_out_port(p):
            raise ModelError(f"conn_dest of in port {p!r}")
        return tuple(self._dests.get(p, ()))

    def conn_sources(self, p: str) -> tuple:
        if not self.is_in_port(p):
            raise ModelError(f"conn_sources of out port {p!r}")
        return tuple(self._srcs.get(p, ()))

    def dispatch_protocol(self, t: str) -> str:
        return self.thread(t).dispatch

    def thread_ids(self) -> list:
        return sorted(self.threads)

    def to_json(self):
        return {"threads": [t.to_json() for t in self.threads.values()],
                "connections": [[c.src, c.dst] for c in self.connections]}

    def digest(self) -> str:
        return hashlib.sha256(serialize_model(self).encode()).hexdigest()


def serialize_model(m: InstanceModel) -> str:
    return json.dumps(m.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def load_model(path) -> InstanceModel:
    with open(path, encoding="utf-8") as f:
        return parse_model(f.read())


def parse_model(text: str) -> InstanceModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, e.lineno, e.colno) from None
    return model_from_json(obj)


# -- validation ------------------------------------------------------------------

def _require(cond, message, element=None):
    if not cond:
        raise ValidationError(message, element)


def _ident(name, what, element):
    _require(isinstance(name, str) and _IDENT.match(name),
             f"{what} must be an identifier, got {name!r}", element)


def _port_from_json(obj, thread_id):
    _require(isinstance(obj, dict), "port entry must be an object", thread_id)
    pid = obj.get("id")
    _ident(pid, "port id", thread_id)
    where = f"{thread_id}.{pid}"
    unknown = set(obj) - {"id", "kind", "dir", "type", "queueSize", "properties"}
    _require(not unknown, f"unknown port keys {sorted(unknown)}", where)
    kind = obj.get("kind")
    _require(kind in KINDS, f"port kind must be one of {KINDS}, got {kind!r}", where)
    direction = obj.get("dir")
    _require(direction in DIRECTIONS, f"port dir must be in or out, got {direction!r}", where)
    qs = obj.get("queueSize", 1)
    _require(isinstance(qs, int) and not isinstance(qs, bool) and qs >= 1,
             "queue size must be a positive integer", where)
    _require(kind != "data" or qs == 1, "data port queue size must be 1", where)
    if kind == "event":
        _require(obj.get("type") in (None, "Event"), "event ports carry no value type", where)
        vtype = None
    else:
        _require("type" in obj, f"{kind} port needs a value type", where)
        try:
            vtype = normalize_type(obj["type"])
        except ValueTypeError as e:
            raise ValidationError(str(e), where) from None
        _require(vtype is not None, f"{kind} port needs a value type", where)
    props = obj.get("properties", {})
    _require(isinstance(props, dict), "port properties must be an object", where)
    return PortDecl(pid, thread_id, kind, direction, vtype, qs, dict(props))


def _check_behavior(b: BehaviorSpec, ports: dict, timeouts, where):
    trigger_ids = {p for p, d in ports.items() if d.direction == "in" and d.kind != "data"}
    trigger_ids |= {t.id for t in timeouts}
    in_ports = {p for p, d in ports.items() if d.direction == "in"}
    declared = b.declared_vars()
    clash = declared & set(ports)
    _require(not clash, f"variable names clash with port names {sorted(clash)}", where)
    for tr in b.transitions:
        unknown = condition_triggers(tr.cond) - trigger_ids
        _require(not unknown,
                 f"dispatch condition {tr.when!r} references undeclared triggers {sorted(unknown)}",
                 where)
    for phase, actions in [("init_actions", b.init_actions)] + [
            (f"transition {tr.source}->{tr.target}", tr.actions) for tr in b.transitions]:
        for a in actions:
            if a.op == "set":
                _require(a.target in declared,
                         f"{phase}: assignment to undeclared variable {a.target!r}", where)
            elif a.op in ("put", "emit"):
                d = ports.get(a.target)
                _require(d is not None and d.direction == "out",
                         f"{phase}: {a.op} target {a.target!r} is not an out port", where)
                _require((a.op == "emit") == (d.kind == "event"),
                         f"{phase}: use emit for event ports and put for data/event data ports"
                         f" ({a.target!r})", where)
            else:
                d = ports.get(a.target)
                _require(d is not None and d.direction == "in" and d.kind != "data",
                         f"{phase}: next target {a.target!r} is not an in event (data) port", where)
            if a.tree is not None:
                unknown = ex.names(a.tree) - declared - in_ports
                _require(not unknown, f"{phase}: unknown names {sorted(unknown)} in {a.source!r}",
                         where)
    for name, v in b.variables:
        _require(not name.startswith("$"), f"variable {name!r} is reserved", where)
    _require(STATE_VAR not in declared, f"{STATE_VAR} is reserved", where)


def _timeouts_from_json(obj, thread: ThreadDecl):
    raw = []
    if "timeout" in obj:
        raw.append(obj["timeout"])
    raw.extend(obj.get("timeouts", []))
    out = []
    for t in raw:
        _require(isinstance(t, dict), "timeout entry must be an object", thread.id)
        unknown = set(t) - {"id", "reset", "duration_ns", "duration_port", "name"}
        _require(not unknown, f"unknown timeout keys {sorted(unknown)}", thread.id)
        _require(("duration_ns" in t) != ("duration_port" in t),
                 "timeout needs exactly one of duration_ns or duration_port", thread.id)
        reset = t.get("reset")
        _require(isinstance(reset, list), "timeout reset must be a list of port names", thread.id)
        duration = t["duration_port"] if "duration_port" in t else t["duration_ns"]
        try:
            out.append(create_timeout(thread, reset, duration, t.get("name"),
                                      taken=[d.id for d in out], tid=t.get("id")))
        except TimeoutSpecError as e:
            raise ValidationError(str(e), thread.id) from None
    return tuple(out)


def _thread_from_json(obj):
    _require(isinstance(obj, dict), "thread entry must be an object")
    tid = obj.get("id")
    _ident(tid, "thread id", None)
    unknown = set(obj) - {"id", "dispatch", "period_ns", "ports", "behavior",
                          "timeout", "timeouts", "properties"}
    _require(not unknown, f"unknown thread keys {sorted(unknown)}", tid)
    dispatch = obj.get("dispatch")
    _require(isinstance(dispatch, str) and dispatch.lower() in PROTOCOLS,
             f"dispatch must be periodic, sporadic or timed, got {dispatch!r}", tid)
    dispatch = PROTOCOLS[dispatch.lower()]
    period = obj.get("period_ns")
    if dispatch == "Sporadic":
        _require(period is None, "sporadic threads have no period", tid)
    else:
        _require(isinstance(period, int) and not isinstance(period, bool) and period > 0,
                 f"{dispatch} thread needs period_ns > 0", tid)
    raw_ports = obj.get("ports", [])
    _require(isinstance(raw_ports, list), "ports must be a list", tid)
    ports = {}
    for p in raw_ports:
        decl = _port_from_json(p, tid)
        _require(decl.id not in ports, f"duplicate port id {decl.id!r}", tid)
        ports[decl.id] = decl
    try:
        behavior = BehaviorSpec.from_json(obj.get("behavior"))
    except BehaviorError as e:
        raise ValidationError(str(e), tid) from None
    props = obj.get("properties", {})
    _require(isinstance(props, dict), "thread properties must be an object", tid)
    thread = ThreadDecl(tid, dispatch, period, ports, behavior, (), dict(props))
    timeouts = _timeouts_from_json(obj, thread)
    _check_behavior(behavior, ports, timeouts, tid)
    return ThreadDecl(tid, dispatch, period, ports, behavior, timeouts, dict(props))


def model_from_json(obj) -> InstanceModel:
    """Validate a decoded model document and build the instance model."""
    _require(isinstance(obj, dict), "model must be a JSON object")
    unknown = set(obj) - {"threads", "connections"}
    _require(not unknown, f"unknown top-level keys {sorted(unknown)}")
    raw_threads = obj.get("threads", [])
    _require(isinstance(raw_threads, list), "threads must be a list")
    threads = {}
    for t in raw_threads:
        decl = _thread_from_json(t)
        _require(decl.id not in threads, f"duplicate thread id {decl.id!r}")
        threads[decl.id] = decl
    ports = {p.qid: p for t in threads.values() for p in t.ports.values()}
    raw_conns = obj.get("connections", [])
    _require(isinstance(raw_conns, list), "connections must be a list")
    conns = []
    seen = set()
    for c in raw_conns:
        _require(isinstance(c, list) and len(c) == 2 and all(isinstance(x, str) for x in c),
                 f"connection must be a pair of port names, got {c!r}")
        src, dst = c
        where = f"{src} -> {dst}"
        _require(src in ports, f"connection source {src!r} is not a declared port", where)
        _require(dst in ports, f"connection destination {dst!r} is not a declared port", where)
        ps, pd = ports[src], ports[dst]
        _require(ps.direction == "out", "connection source must be out", where)
        _require(pd.direction == "in", "connection destination must be in", where)
        _require(ps.kind == pd.kind,
                 f"connection kinds differ ({ps.kind} -> {pd.kind})", where)
        _require(ps.thread != pd.thread, "connection endpoints must belong to different threads",
                 where)
        _require(ps.vtype == pd.vtype, "connection value types differ", where)
        _require((src, dst) not in seen, "duplicate connection", where)
        seen.add((src, dst))
        conns.append(Connection(src, dst))
    incoming = {}
    for c in conns:
        incoming[c.dst] = incoming.get(c.dst, 0) + 1
    for qid, p in ports.items():
        if p.direction == "in" and p.kind == "data":
            _require(incoming.get(qid, 0) == 1,
                     f"in data port needs exactly one incoming connection, has {incoming.get(qid, 0)}",
                     qid)
    return InstanceModel(threads, tuple(conns))
