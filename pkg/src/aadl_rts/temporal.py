"""Superdense time, recorded interpretations and the ``@`` accessor.

A trace is a JSON Lines file.  The first record is a header; each following
record is either a write::

    {"t": 10000000, "n": 3, "var": "IPS:consumer:inp", "val": [...]}

or an engine mark (``{"t":..., "n":..., "mark": "receive_input", ...}``); the
last record seals the horizon (``{"seal": [t, n]}``).  Records are in world
order; writes to the same variable in the same world resolve in file order.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from typing import Any, NamedTuple

from . import expr as ex
from .rts import DispatchStatus, time_stamp
from .values import (ORIGIN, PortQueue, Time, from_json, queue_from_json,
                     queue_to_json, to_json)

TRACE_FORMAT = "aadl-rts-trace"
TRACE_VERSION = 1
ROLES = ("IPS", "APS", "Var", "Sts", "Sch", "Dir")

__all__ = ["Time", "VariableId", "Trace", "TraceRecorder", "at", "eval",
           "time_stamp", "event_occurrences", "HorizonError", "UnknownVariable"]


class HorizonError(Exception):
    pass


class UnknownVariable(KeyError):
    pass


class TraceFormatError(Exception):
    pass


class VariableId(NamedTuple):
    """``role:owner:name``.

    Roles ``IPS``, ``APS`` and ``Var`` are the dynamic variables proper;
    ``Sts`` (dispatch status), ``Sch`` (schedulability) and ``Dir``
    (director phase) record engine state alongside them.
    """

    role: str
    owner: str
    name: str

    def __str__(self):
        return f"{self.role}:{self.owner}:{self.name}"

    @classmethod
    def parse(cls, text: str) -> "VariableId":
        parts = text.split(":")
        if len(parts) != 3 or parts[0] not in ROLES:
            raise UnknownVariable(text)
        return cls(*parts)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Write(NamedTuple):
    time: Time
    var: str
    value: Any


class Mark(NamedTuple):
    time: Time
    mark: str
    info: dict


class Trace:
    """A recorded interpretation: every variable's value at every world."""

    def __init__(self, header: dict, entries: list, seal: Time | None = None):
        self.header = header
        self.entries = entries
        self.seal = seal
        self._index = None
        self._model = None

    @property
    def horizon_ns(self) -> int | float:
        """Declared horizon; an unbounded run ends at its seal."""
        h = self.header.get("horizon_ns")
        if h is not None:
            return h
        return self.seal.t if self.seal is not None else float("inf")

    @property
    def model(self):
        if self._model is None:
            from .model import model_from_json
            self._model = model_from_json(self.header["model"])
        return self._model

    def writes(self):
        return (e for e in self.entries if isinstance(e, Write))

    def marks(self, name: str | None = None):
        return [e for e in self.entries
                if isinstance(e, Mark) and (name is None or e.mark == name)]

    def variables(self) -> set:
        return set(self._build_index())

    def _build_index(self):
        if self._index is None:
            index = {}
            for e in self.entries:
                if isinstance(e, Write):
                    times, values = index.setdefault(e.var, ([], []))
                    times.append(e.time)
                    values.append(e.value)
            self._index = index
        return self._index

    def history(self, d) -> list:
        """All ``(world, value)`` writes to ``d`` in file order."""
        times, values = self._build_index().get(str(d), ([], []))
        return list(zip(times, values))

    def at(self, d, when: Time):
        """Value of ``d`` at world ``when``: the latest write at or before it."""
        when = Time(*when)
        if when.t > self.horizon_ns or when < ORIGIN:
            raise HorizonError(f"world {when} is outside [0, {self.horizon_ns}]")
        key = str(d)
        entry = self._build_index().get(key)
        if entry is None:
            raise UnknownVariable(key)
        times, values = entry
        i = bisect_right(times, when)
        if i == 0:
            raise HorizonError(f"{key} has no value at {when}")
        return values[i - 1]

    def worlds(self) -> list:
        """Distinct worlds carrying at least one write, in order."""
        seen = []
        for e in self.entries:
            if isinstance(e, Write) and (not seen or seen[-1] != e.time):
                seen.append(e.time)
        return seen

    # -- files

    def lines(self):
        yield _dump(self.header)
        for e in self.entries:
            rec = {"t": e.time.t, "n": e.time.n}
            if isinstance(e, Write):
                rec["var"] = e.var
                rec["val"] = encode_value(e.var, e.value)
            else:
                rec["mark"] = e.mark
                rec.update(e.info)
            yield _dump(rec)
        if self.seal is not None:
            yield _dump({"seal": [self.seal.t, self.seal.n]})

    def dump(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in self.lines():
                f.write(line + "\n")

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as f:
            return cls.from_lines(f)

    @classmethod
    def from_lines(cls, lines) -> "Trace":
        it = iter(lines)
        try:
            header = json.loads(next(it))
        except (StopIteration, json.JSONDecodeError) as e:
            raise TraceFormatError(f"missing or malformed trace header: {e}") from None
        if header.get("format") != TRACE_FORMAT:
            raise TraceFormatError("not a trace file")
        if header.get("version") != TRACE_VERSION:
            raise TraceFormatError(
                f"trace format version {header.get('version')} is not supported "
                f"(expected {TRACE_VERSION})")
        caps = _capacities(header.get("model"))
        entries = []
        seal = None
        for lineno, line in enumerate(it, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceFormatError(f"line {lineno}: {e.msg}") from None
            if "seal" in rec:
                seal = Time(*rec["seal"])
                continue
            time = Time(rec.pop("t"), rec.pop("n"))
            if "var" in rec:
                entries.append(Write(time, rec["var"], decode_value(rec["var"], rec["val"], caps)))
            else:
                entries.append(Mark(time, rec.pop("mark"), rec))
        return cls(header, entries, seal)


def _capacities(model_obj) -> dict:
    caps = {}
    for t in (model_obj or {}).get("threads", []):
        for p in t.get("ports", []):
            caps[(t["id"], p["id"])] = p.get("queueSize", 1) if p.get("dir") == "in" else 1
    return caps


def encode_value(var: str, v):
    role = var.split(":", 1)[0]
    if role in ("IPS", "APS"):
        return queue_to_json(v)
    if role == "Sts":
        return v.to_json()
    return to_json(v)


def decode_value(var: str, obj, caps=None):
    role, owner, name = var.split(":")
    if role in ("IPS", "APS"):
        return queue_from_json(obj, (caps or {}).get((owner, name), 1))
    if role == "Sts":
        return DispatchStatus.from_json(obj)
    return from_json(obj)


class TraceRecorder:
    """Append-only trace writer used by the director.

    Records are kept in memory and, if ``sink`` is an open text file,
    streamed to it as they are produced.
    """

    def __init__(self, header: dict, sink=None):
        self.trace = Trace(header, [])
        self.sink = sink
        self.last = ORIGIN
        if sink is not None:
            sink.write(_dump(header) + "\n")

    def _emit(self, entry, rec):
        if entry.time < self.last:
            raise ValueError(f"trace records must be in world order ({entry.time} < {self.last})")
        self.last = entry.time
        self.trace.entries.append(entry)
        self.trace._index = None
        if self.sink is not None:
            self.sink.write(_dump(rec) + "\n")

    def write(self, when: Time, var, value):
        var = str(var)
        self._emit(Write(when, var, value),
                   {"t": when.t, "n": when.n, "var": var, "val": encode_value(var, value)})

    def mark(self, when: Time, name: str, **info):
        rec = {"t": when.t, "n": when.n, "mark": name}
        rec.update(info)
        self._emit(Mark(when, name, info), rec)

    def seal(self, when: Time):
        self.trace.seal = when
        if self.sink is not None:
            self.sink.write(_dump({"seal": [when.t, when.n]}) + "\n")
            self.sink.flush()


def at(tr: Trace, d, when) -> Any:
    return tr.at(d, when)


class _TraceEnv(ex.Environment):
    def __init__(self, trace):
        self.trace = trace

    def lookup(self, name, when):
        try:
            return self.trace.at(VariableId.parse(name), when)
        except UnknownVariable:
            raise ex.EvalError(f"unknown variable {name!r}") from None

    def time_stamp(self, when):
        return time_stamp(when)

    def at_allowed(self):
        return True


def eval(tr: Trace, e, when) -> Any:  # noqa: A001 - mirrors the d@τ evaluation name
    """Evaluate expression ``e`` (text or tree) with every variable read at ``when``."""
    tree = ex.parse(e) if isinstance(e, str) else e
    when = Time(*when)
    if when.t > tr.horizon_ns or when < ORIGIN:
        raise HorizonError(f"world {when} is outside [0, {tr.horizon_ns}]")
    return ex.evaluate(tree, _TraceEnv(tr), when)


def appended(old: PortQueue | None, new: PortQueue) -> int:
    """Number of items a queue write added."""
    if old is None:
        return len(new)
    if new.items[:len(old)] == old.items:
        return len(new) - len(old)
    return sum(1 for x in new.items if x not in old.items)


def event_occurrences(tr: Trace, owner: str, ports) -> list:
    """Event arrivals/departures on ``ports`` of ``owner`` as ``(world, port, count)``.

    An occurrence is a write that adds items to the port's IPS: arrival by
    Move or injection for in ports, Send_Output for out ports.
    """
    wanted = {f"IPS:{owner}:{p}": p for p in ports}
    last = {}
    out = []
    for e in tr.entries:
        if isinstance(e, Write) and e.var in wanted:
            k = appended(last.get(e.var), e.value)
            last[e.var] = e.value
            if k:
                out.append((e.time, wanted[e.var], k))
    return out
