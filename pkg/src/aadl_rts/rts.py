"""Thread state and run-time services.

Every function here is pure: it takes a :class:`ThreadState` and returns a
new one.  The compute and initialize windows hand the behavior a context
object (:class:`ComputeContext`, :class:`InitContext`) that enforces which
services may be called and closes when the window ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

from .values import (EVENT, ORIGIN, PortQueue, Time, TimestampedValue,
                     ValueTypeError, coerce, same_value, zero_value)

TIME_TRIGGERED = "TimeTriggered"
EVENT_TRIGGERED = "EventTriggered"
NOT_ENABLED = "NotEnabled"


class ServiceError(Exception):
    """A port service was called with the wrong port, on an empty queue, or
    outside its window."""


class InitializationError(Exception):
    def __init__(self, thread, port, message):
        super().__init__(f"thread {thread!r}, port {port!r}: {message}")
        self.thread = thread
        self.port = port


class EngineContractError(Exception):
    """An entrypoint or RTS rule was invoked out of order."""


class ThreadFault(Exception):
    """Behavior code raised during the compute window.

    ``state`` is the thread state after Receive_Input, before any action.
    """

    def __init__(self, thread, cause, state):
        super().__init__(f"thread {thread!r} faulted: {cause}")
        self.thread = thread
        self.cause = cause
        self.state = state


@dataclass(frozen=True)
class DispatchStatus:
    triggers: frozenset = frozenset()
    kind: str = NOT_ENABLED

    @property
    def enabled(self) -> bool:
        return self.kind != NOT_ENABLED

    def __bool__(self):
        return bool(self.triggers) or self.kind == TIME_TRIGGERED

    def to_json(self):
        return {"kind": self.kind, "triggers": sorted(self.triggers)}

    @classmethod
    def from_json(cls, obj):
        return cls(frozenset(obj["triggers"]), obj["kind"])


CLEARED = DispatchStatus()


def _queue_map_same(a, b):
    return a.keys() == b.keys() and all(a[k].same(b[k]) for k in a)


@dataclass(frozen=True)
class ThreadState:
    """The six-element thread tuple plus bookkeeping that is not part of it.

    ``decl`` is the owning :class:`~aadl_rts.model.ThreadDecl`; ``baseline``
    and ``updated`` support the ``Updated`` service.
    """

    ips_in: dict
    aps_in: dict
    aps_out: dict
    ips_out: dict
    vars: dict
    status: DispatchStatus = CLEARED
    decl: Any = field(default=None, compare=False, repr=False)
    baseline: dict = field(default_factory=dict, compare=False, repr=False)
    updated: frozenset = field(default=frozenset(), compare=False, repr=False)

    @classmethod
    def initial(cls, decl) -> "ThreadState":
        ins = {p.id: PortQueue((), p.queue_size) for p in decl.ports.values()
               if p.direction == "in"}
        outs = {p.id: PortQueue((), 1) for p in decl.ports.values()
                if p.direction == "out"}
        return cls(dict(ins), dict(ins), dict(outs), dict(outs), {}, CLEARED, decl)

    def as_tuple(self):
        return (self.ips_in, self.aps_in, self.aps_out, self.ips_out,
                self.vars, self.status)

    def same(self, other: "ThreadState") -> bool:
        """Bit-exact equality of the six tuple elements."""
        return (_queue_map_same(self.ips_in, other.ips_in)
                and _queue_map_same(self.aps_in, other.aps_in)
                and _queue_map_same(self.aps_out, other.aps_out)
                and _queue_map_same(self.ips_out, other.ips_out)
                and self.vars.keys() == other.vars.keys()
                and all(same_value(self.vars[k], other.vars[k]) for k in self.vars)
                and self.status == other.status)

    @property
    def thread(self):
        return self.decl.id if self.decl is not None else "?"

    def port(self, p):
        try:
            return self.decl.ports[p]
        except KeyError:
            raise ServiceError(f"thread {self.thread!r} has no port {p!r}") from None


def _is_data(s, p):
    return s.decl.ports[p].kind == "data"


def receive_input(s: ThreadState) -> ThreadState:
    """Freeze every in port: APS gets the IPS queue, event queues are drained."""
    ips = dict(s.ips_in)
    aps = dict(s.aps_in)
    baseline = dict(s.baseline)
    changed = set()
    for p, q in s.ips_in.items():
        aps[p] = q
        if _is_data(s, p):
            if q:
                new = q.head().value
                if p not in baseline or not same_value(baseline[p], new):
                    changed.add(p)
                baseline[p] = new
        else:
            ips[p] = q.empty()
    return replace(s, ips_in=ips, aps_in=aps, baseline=baseline,
                   updated=frozenset(changed))


def send_output(s: ThreadState) -> ThreadState:
    """Release every out port: IPS gets the APS queue, APS is emptied."""
    ips = dict(s.ips_out)
    aps = dict(s.aps_out)
    for p, q in s.aps_out.items():
        ips[p] = q
        aps[p] = q.empty()
    return replace(s, ips_out=ips, aps_out=aps)


# -- port services ----------------------------------------------------------------

def _in_port(s, p):
    decl = s.port(p)
    if decl.direction != "in":
        raise ServiceError(f"{p!r} is not an in port")
    return decl


def get_value(s: ThreadState, p: str):
    """Oldest APS item without removing it; ``EVENT`` on event ports."""
    _in_port(s, p)
    q = s.aps_in[p]
    if not q:
        raise ServiceError(f"get_value on empty port {p!r}")
    return q.head().value


def next_value(s: ThreadState, p: str) -> ThreadState:
    decl = _in_port(s, p)
    if decl.kind == "data":
        raise ServiceError(f"next_value on data port {p!r}")
    q = s.aps_in[p]
    if not q:
        raise ServiceError(f"next_value on empty port {p!r}")
    aps = dict(s.aps_in)
    aps[p] = PortQueue(q.items[1:], q.capacity)
    return replace(s, aps_in=aps)


def get_count(s: ThreadState, p: str) -> int:
    _in_port(s, p)
    return len(s.aps_in[p])


def updated(s: ThreadState, p: str) -> bool:
    decl = _in_port(s, p)
    if decl.kind != "data":
        raise ServiceError(f"updated on non-data port {p!r}")
    return p in s.updated


def put_value(s: ThreadState, p: str, v=EVENT, ts: Time = ORIGIN) -> ThreadState:
    decl = s.port(p)
    if decl.direction != "out":
        raise ServiceError(f"put_value on in port {p!r}")
    if decl.kind == "event":
        if v is not EVENT:
            raise ServiceError(f"event port {p!r} carries no value")
    else:
        try:
            v = coerce(v, decl.vtype)
        except ValueTypeError as e:
            raise ServiceError(f"put_value on {p!r}: {e}") from None
    aps = dict(s.aps_out)
    aps[p] = PortQueue((TimestampedValue(v, ts),), 1)
    return replace(s, aps_out=aps)


# -- entrypoint windows ----------------------------------------------------------

class ComputeContext:
    """Application view of a thread during one accepted compute window."""

    def __init__(self, state: ThreadState, now: Time = ORIGIN):
        self._state = state
        self.vars = dict(state.vars)
        self.status = state.status
        self.now = now
        self._open = True

    def _check(self):
        if not self._open:
            raise ServiceError("port service called outside the compute window")

    def get_value(self, p):
        self._check()
        return get_value(self._state, p)

    def next_value(self, p):
        self._check()
        self._state = next_value(self._state, p)

    def get_count(self, p):
        self._check()
        return get_count(self._state, p)

    def updated(self, p):
        self._check()
        return updated(self._state, p)

    def put_value(self, p, v=EVENT):
        self._check()
        self._state = put_value(self._state, p, v, self.now)

    def emit(self, p):
        self.put_value(p, EVENT)

    def aps_queue(self, p):
        self._check()
        _in_port(self._state, p)
        return self._state.aps_in[p]

    def time_stamp(self):
        return time_stamp(self.now)

    def close(self) -> ThreadState:
        self._open = False
        return replace(self._state, vars=self.vars)


class InitContext:
    """Application view during Initialize_Entrypoint.

    Inputs cannot be read; only out data ports may be given values.
    ``create_timeout`` is served here and nowhere else.
    """

    def __init__(self, state: ThreadState, timeout_factory: Callable | None = None):
        self._state = state
        self.vars = dict(state.vars)
        self._timeout_factory = timeout_factory
        self._open = True
        self.timeouts = []

    @property
    def thread(self):
        return self._state.thread

    def _no_input(self, p):
        raise InitializationError(self.thread, p, "input ports cannot be read during initialization")

    get_value = next_value = get_count = updated = aps_queue = _no_input

    def put_value(self, p, v=EVENT):
        if not self._open:
            raise ServiceError("put_value outside the initialize window")
        decl = self._state.port(p)
        if decl.direction == "out" and decl.kind != "data":
            raise InitializationError(self.thread, p,
                                      "sending on event (data) ports during initialization is forbidden")
        self._state = put_value(self._state, p, v, ORIGIN)

    def emit(self, p):
        self.put_value(p, EVENT)

    def time_stamp(self):
        return 0.0

    def create_timeout(self, reset_ports, duration, name=None):
        if not self._open or self._timeout_factory is None:
            raise EngineContractError("Create_Timeout is only served during initialization")
        decl = self._timeout_factory(reset_ports, duration, name)
        self.timeouts.append(decl)
        return decl.id

    def close(self) -> ThreadState:
        self._open = False
        return replace(self._state, vars=self.vars)


def time_stamp(now: Time) -> float:
    """Model time in floating seconds; micro-steps do not advance it."""
    return now.t / 1e9


def initialize_entrypoint(s: ThreadState, b, timeout_factory=None) -> ThreadState:
    """Run the behavior's initialization, default every out data port, send."""
    ctx = InitContext(s, timeout_factory)
    b.initialize(ctx)
    s1 = ctx.close()
    aps = dict(s1.aps_out)
    for p, decl in s1.decl.ports.items():
        if decl.direction != "out":
            continue
        if decl.kind == "data":
            if not aps[p]:
                aps[p] = PortQueue((TimestampedValue(zero_value(decl.vtype), ORIGIN),), 1)
        else:
            aps[p] = aps[p].empty()
    return send_output(replace(s1, aps_out=aps))


def compute_entrypoint(s: ThreadState, status: DispatchStatus, b, *,
                       tick: Callable[[], Time] | None = None,
                       observe: Callable | None = None):
    """Evaluate the dispatch status; if accepted, receive, execute, send.

    ``tick`` supplies the world of each stage and ``observe(stage, world,
    state)`` is told about every intermediate state; the director uses the
    pair to record the trace.  Returns ``(state, accepted)``.
    """
    if not status:
        raise EngineContractError("Compute_Entrypoint needs a non-empty dispatch status")
    tick = tick or (lambda: ORIGIN)
    observe = observe or (lambda stage, world, state: None)
    s0 = replace(s, status=status)
    choice = b.select(dict(s0.vars), status)
    if choice is None:
        return s0, False
    w = tick()
    s1 = receive_input(s0)
    observe("receive", w, s1)
    w = tick()
    ctx = ComputeContext(s1, w)
    try:
        b.execute(ctx, choice)
        s2 = ctx.close()
    except Exception as e:
        ctx.close()
        raise ThreadFault(s.thread, e, s1) from e
    observe("compute", w, s2)
    w = tick()
    s3 = send_output(s2)
    observe("send", w, s3)
    w = tick()
    s4 = replace(s3, status=CLEARED)
    observe("complete", w, s4)
    return s4, True


def finalize_entrypoint(s: ThreadState) -> ThreadState:
    return s
