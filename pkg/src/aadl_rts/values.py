"""Value domain, timestamped values and bounded port queues.

Values are plain Python objects:

* ``bool``, ``int``, ``float``, ``str`` for the atomic base types,
* :class:`EnumLiteral` for enumeration literals,
* ``dict`` (field name -> value) for records,
* ``tuple`` for arrays,
* :data:`EVENT` for the presence of an event (written ``*``).

Queues are immutable; every operation returns a new :class:`PortQueue`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple


class QueueOverflow(Exception):
    """An event or event-data queue received more items than its capacity."""


class ValueTypeError(Exception):
    pass


class _EventMarker:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "*"

    def __reduce__(self):
        return (_EventMarker, ())


EVENT = _EventMarker()


@dataclass(frozen=True)
class EnumLiteral:
    name: str

    def __repr__(self):
        return f"#{self.name}"


class Time(NamedTuple):
    """Superdense instant: integer nanoseconds plus a micro-step index.

    Tuple ordering is the lexicographic precedence on worlds.
    """

    t: int
    n: int = 0

    def succ(self) -> "Time":
        return Time(self.t, self.n + 1)

    def __repr__(self):
        return f"({self.t},{self.n})"


ORIGIN = Time(0, 0)


class TimestampedValue(NamedTuple):
    value: Any
    ts: Time


def value_key(v):
    """Hashable key giving structural, bit-exact equality."""
    if v is EVENT:
        return ("*",)
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, int):
        return ("i", v)
    if isinstance(v, float):
        return ("f", struct.pack("<d", v))
    if isinstance(v, str):
        return ("s", v)
    if isinstance(v, EnumLiteral):
        return ("e", v.name)
    if isinstance(v, dict):
        return ("r", tuple(sorted((k, value_key(x)) for k, x in v.items())))
    if isinstance(v, (tuple, list)):
        return ("a", tuple(value_key(x) for x in v))
    raise ValueTypeError(f"not a value: {v!r}")


def same_value(a, b) -> bool:
    return value_key(a) == value_key(b)


@dataclass(frozen=True)
class PortQueue:
    """Bounded sequence of timestamped values, oldest first."""

    items: tuple = ()
    capacity: int = 1

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        if len(self.items) > self.capacity:
            raise QueueOverflow(
                f"{len(self.items)} items exceed capacity {self.capacity}")

    def __len__(self):
        return len(self.items)

    def __bool__(self):
        return bool(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def values(self) -> list:
        return [tv.value for tv in self.items]

    def head(self) -> TimestampedValue:
        return self.items[0]

    def empty(self) -> "PortQueue":
        return PortQueue((), self.capacity)

    def key(self):
        return tuple((value_key(tv.value), tuple(tv.ts)) for tv in self.items)

    def same(self, other: "PortQueue") -> bool:
        return self.key() == other.key()

    def __repr__(self):
        inner = " ".join(repr(tv.value) for tv in reversed(self.items))
        return f"<{inner}>"


def make_queue(values: Iterable[Any] = (), capacity: int = 1,
               ts: Time = ORIGIN) -> PortQueue:
    """Build a queue from bare values (oldest first), all stamped ``ts``."""
    items = tuple(v if isinstance(v, TimestampedValue) else TimestampedValue(v, ts)
                  for v in values)
    return PortQueue(items, capacity)


def enqueue(q: PortQueue, v: TimestampedValue, kind: str) -> PortQueue:
    """Add ``v`` to ``q``.

    Data ports overwrite (the queue becomes ``<v>``); event and event-data
    ports append ``v`` as the newest item and raise :class:`QueueOverflow`
    when full.
    """
    if kind == "data":
        return PortQueue((v,), q.capacity)
    if len(q.items) >= q.capacity:
        raise QueueOverflow(
            f"queue of capacity {q.capacity} is full; Queue_Size too small")
    return PortQueue(q.items + (v,), q.capacity)


def dequeue_all(q: PortQueue) -> tuple[list, PortQueue]:
    return list(q.items), q.empty()


# -- types -------------------------------------------------------------------

BASE_TYPES = ("Boolean", "Integer", "Float", "String")

_ALIASES = {
    "Boolean": "Boolean",
    "Integer": "Integer",
    "Natural": "Integer",
    "Float": "Float",
    "String": "String",
    "Character": "String",
}


def normalize_type(spec):
    """Canonical form of a value-type declaration.

    Accepts ``Base_Types`` names (``Integer_32``, ``Base_Types::Float`` ...),
    ``{"enum": [...]}``, ``{"record": {...}}`` and ``{"array": T, "size": n}``.
    """
    if spec is None:
        return None
    if isinstance(spec, str):
        name = spec.split("::")[-1]
        if name in _ALIASES:
            return _ALIASES[name]
        for prefix in ("Integer_", "Unsigned_"):
            if name.startswith(prefix):
                return "Integer"
        if name.startswith("Float_"):
            return "Float"
        if name == "Event":
            return None
        raise ValueTypeError(f"unknown value type {spec!r}")
    if isinstance(spec, dict):
        if "enum" in spec:
            lits = spec["enum"]
            if (not isinstance(lits, list) or not lits
                    or not all(isinstance(x, str) for x in lits)):
                raise ValueTypeError("enum type needs a non-empty list of literal names")
            return {"enum": list(lits)}
        if "record" in spec:
            fields = spec["record"]
            if not isinstance(fields, dict) or not fields:
                raise ValueTypeError("record type needs a non-empty field map")
            if set(fields) <= {"event", "enum"} and len(fields) == 1:
                raise ValueTypeError(
                    "a record whose only field is 'event' or 'enum' clashes "
                    "with the literal syntax")
            return {"record": {k: normalize_type(t) for k, t in fields.items()}}
        if "array" in spec:
            size = spec.get("size")
            if size is not None and (not isinstance(size, int) or size < 0):
                raise ValueTypeError("array size must be a non-negative integer")
            return {"array": normalize_type(spec["array"]), "size": size}
    raise ValueTypeError(f"unknown value type {spec!r}")


def zero_value(vtype):
    """Canonical default of a type; used when Initialize sets no default."""
    if vtype is None:
        return EVENT
    if isinstance(vtype, str):
        return {"Boolean": False, "Integer": 0, "Float": 0.0, "String": ""}[vtype]
    if "enum" in vtype:
        return EnumLiteral(vtype["enum"][0])
    if "record" in vtype:
        return {k: zero_value(t) for k, t in vtype["record"].items()}
    n = vtype.get("size") or 0
    return tuple(zero_value(vtype["array"]) for _ in range(n))


def conforms(v, vtype) -> bool:
    if vtype is None:
        return v is EVENT
    if isinstance(vtype, str):
        if vtype == "Boolean":
            return isinstance(v, bool)
        if vtype == "Integer":
            return isinstance(v, int) and not isinstance(v, bool)
        if vtype == "Float":
            return isinstance(v, float) or (isinstance(v, int) and not isinstance(v, bool))
        return isinstance(v, str)
    if "enum" in vtype:
        return isinstance(v, EnumLiteral) and v.name in vtype["enum"]
    if "record" in vtype:
        fields = vtype["record"]
        return (isinstance(v, dict) and set(v) == set(fields)
                and all(conforms(v[k], t) for k, t in fields.items()))
    if not isinstance(v, tuple):
        return False
    if vtype.get("size") is not None and len(v) != vtype["size"]:
        return False
    return all(conforms(x, vtype["array"]) for x in v)


def coerce(v, vtype):
    """Check ``v`` against ``vtype``; integers widen to Float."""
    if not conforms(v, vtype):
        raise ValueTypeError(f"value {v!r} does not conform to type {vtype!r}")
    if vtype == "Float" and isinstance(v, int):
        return float(v)
    return v


# -- JSON literal syntax -------------------------------------------------------

def to_json(v):
    if v is EVENT:
        return {"event": True}
    if isinstance(v, EnumLiteral):
        return {"enum": v.name}
    if isinstance(v, float) and not math.isfinite(v):
        raise ValueTypeError("non-finite floats have no JSON literal")
    if isinstance(v, dict):
        return {k: to_json(x) for k, x in v.items()}
    if isinstance(v, (tuple, list)):
        return [to_json(x) for x in v]
    return v


def from_json(obj):
    if isinstance(obj, dict):
        if obj == {"event": True}:
            return EVENT
        if set(obj) == {"enum"} and isinstance(obj["enum"], str):
            return EnumLiteral(obj["enum"])
        return {k: from_json(x) for k, x in obj.items()}
    if isinstance(obj, list):
        return tuple(from_json(x) for x in obj)
    if obj is None:
        raise ValueTypeError("null is not a value")
    return obj


def queue_to_json(q: PortQueue):
    return [{"v": to_json(tv.value), "ts": [tv.ts.t, tv.ts.n]} for tv in q.items]


def queue_from_json(obj, capacity: int) -> PortQueue:
    items = tuple(TimestampedValue(from_json(x["v"]), Time(*x["ts"])) for x in obj)
    return PortQueue(items, max(capacity, len(items)))
