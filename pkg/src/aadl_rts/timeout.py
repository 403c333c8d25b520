"""Create_Timeout and the timeout dispatch trigger.

A timeout watches a set of event (data) ports of its thread.  Every event
on any of them (re)arms it; it expires ``duration`` after the most recent
such event unless another event intervenes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rts import DispatchStatus, EVENT_TRIGGERED, TIME_TRIGGERED


class TimeoutSpecError(Exception):
    pass


@dataclass(frozen=True)
class TimeoutDecl:
    id: str
    owner: str
    reset: tuple
    duration_ns: int | None = None
    duration_port: str | None = None

    def to_json(self):
        out = {"id": self.id, "reset": list(self.reset)}
        if self.duration_port is not None:
            out["duration_port"] = self.duration_port
        else:
            out["duration_ns"] = self.duration_ns
        return out


def create_timeout(thread, reset_ports, duration, name=None, *,
                   phase="initialize", taken=(), tid=None) -> TimeoutDecl:
    """Register a timeout for ``thread`` (a ``ThreadDecl``).

    ``duration`` is positive integer nanoseconds or the name of an in data
    port of the thread holding the duration.  The trigger id is ``tid`` if
    given, else ``timeout_<ports>_<name>``, made fresh against the thread's
    port names and ``taken``.
    """
    if phase != "initialize":
        raise TimeoutSpecError("Create_Timeout is only served during initialization")
    reset = tuple(dict.fromkeys(reset_ports))
    if not reset:
        raise TimeoutSpecError(f"timeout of {thread.id!r} needs at least one reset port")
    for p in reset:
        decl = thread.ports.get(p)
        if decl is None:
            raise TimeoutSpecError(f"timeout reset port {p!r} is not a port of {thread.id!r}")
        if decl.kind == "data":
            raise TimeoutSpecError(f"timeout reset port {p!r} must be an event or event data port")
    duration_ns = duration_port = None
    if isinstance(duration, str):
        decl = thread.ports.get(duration)
        if decl is None or decl.direction != "in" or decl.kind != "data":
            raise TimeoutSpecError(f"duration port {duration!r} must be an in data port of {thread.id!r}")
        if decl.vtype != "Integer":
            raise TimeoutSpecError(f"duration port {duration!r} must carry Integer nanoseconds")
        duration_port = duration
        label = name or duration
    else:
        if isinstance(duration, bool) or not isinstance(duration, int) or duration <= 0:
            raise TimeoutSpecError(f"timeout duration must be a positive integer of nanoseconds, got {duration!r}")
        duration_ns = duration
        label = name or str(duration)
    used = set(thread.ports) | set(taken)
    if tid is not None:
        if tid in used:
            raise TimeoutSpecError(f"timeout id {tid!r} is not fresh in thread {thread.id!r}")
        ident = tid
    else:
        base = "timeout_" + "_".join(reset) + "_" + label
        ident, k = base, 2
        while ident in used:
            ident, k = f"{base}_{k}", k + 1
    return TimeoutDecl(ident, thread.id, reset, duration_ns, duration_port)


def fire(decl: TimeoutDecl, status: DispatchStatus) -> DispatchStatus:
    """Add the timeout's trigger id to a dispatch status."""
    kind = status.kind if status.kind == TIME_TRIGGERED else EVENT_TRIGGERED
    return DispatchStatus(status.triggers | {decl.id}, kind)


class TimerBank:
    """Armed timers, one per timeout declaration, kept by the director."""

    def __init__(self, decls=()):
        self.decls = {}
        self.by_port = {}
        self.expiry = {}
        for d in decls:
            self.add(d)

    def add(self, decl: TimeoutDecl):
        key = (decl.owner, decl.id)
        self.decls[key] = decl
        for p in decl.reset:
            self.by_port.setdefault((decl.owner, p), []).append(key)

    def watching(self, owner, port):
        return [self.decls[k] for k in self.by_port.get((owner, port), ())]

    def arm(self, decl: TimeoutDecl, t_event: int, duration: int):
        self.expiry[(decl.owner, decl.id)] = t_event + duration

    def next_expiry(self):
        return min(self.expiry.values(), default=None)

    def pop_due(self, t: int) -> list:
        due = sorted(k for k, e in self.expiry.items() if e == t)
        for k in due:
            del self.expiry[k]
        return [self.decls[k] for k in due]


def sampled_duration(trace, decl: TimeoutDecl, world) -> int:
    """Duration in effect for an event at ``world``, read from the trace."""
    if decl.duration_port is None:
        return decl.duration_ns
    from .temporal import VariableId
    for role in ("APS", "IPS"):
        q = trace.at(VariableId(role, decl.owner, decl.duration_port), world)
        if q:
            return q.head().value
    raise TimeoutSpecError(f"duration port {decl.duration_port!r} holds no value")


def timeout_active(trace, decl: TimeoutDecl, when) -> bool:
    """Evaluate the definitional timeout formula at real time ``when.t``.

    True iff some reset port had an event exactly one duration earlier and
    no reset port had an event strictly between then and ``when``.
    """
    from .temporal import event_occurrences
    now = when.t if hasattr(when, "t") else int(when)
    events = event_occurrences(trace, decl.owner, decl.reset)
    times = sorted({w.t for w, _, _ in events})
    for w, _, _ in events:
        d = sampled_duration(trace, decl, w)
        if now < d or w.t != now - d:
            continue
        if not any(w.t < e < now for e in times):
            return True
    return False
