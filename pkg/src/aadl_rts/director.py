"""The system executive.

The director initializes every thread, performs the first Move, then
repeats dispatch -> compute -> move over a discrete-event calendar of
periodic instants, timer expirations and injected environment events, and
finally stops the system.  Every state change is recorded in a
:class:`~aadl_rts.temporal.Trace`.

Within one real instant, worlds are numbered by micro-step.  Timer
expirations always occupy the first world of their instant.  If a Move
delivers events to a waiting sporadic or timed thread, another round runs
at the same real time.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, replace

from . import __version__
from .model import InstanceModel, ModelError
from .rts import (EVENT_TRIGGERED, NOT_ENABLED, TIME_TRIGGERED,
                  DispatchStatus, EngineContractError, InitializationError,
                  ThreadFault, ThreadState, compute_entrypoint,
                  finalize_entrypoint, initialize_entrypoint)
from .temporal import TRACE_FORMAT, TRACE_VERSION, TraceRecorder, VariableId
from .timeout import TimerBank, TimeoutSpecError, create_timeout
from .values import (EVENT, ORIGIN, QueueOverflow, Time, TimestampedValue,
                     ValueTypeError, coerce, enqueue, from_json, same_value)

PHASES = ("off", "initialize", "move", "dispatch", "compute", "finalize")
TIE_BREAK = "thread-id-ascending/fanin-seeded-shuffle-v1"


class RunAborted(Exception):
    """The run cannot continue: queue overflow, a zeno cascade, or a bad
    timeout duration."""


class LifecycleError(Exception):
    pass


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Injection:
    t: int
    port: str
    value: object = EVENT


def parse_scenario(text: str, model: InstanceModel) -> list:
    """Parse a JSON Lines scenario of ``{"t", "port", "val"}`` records."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ConfigError(f"scenario line {lineno}: {e.msg}") from None
        if not isinstance(rec, dict) or "t" not in rec or "port" not in rec:
            raise ConfigError(f"scenario line {lineno}: needs 't' and 'port'")
        t = rec["t"]
        if isinstance(t, bool) or not isinstance(t, int) or t < 0:
            raise ConfigError(f"scenario line {lineno}: t must be a non-negative integer")
        try:
            decl = model.port(rec["port"])
        except ModelError as e:
            raise ConfigError(f"scenario line {lineno}: {e}") from None
        if decl.direction != "in":
            raise ConfigError(f"scenario line {lineno}: {rec['port']!r} is not an in port")
        if decl.kind == "event":
            value = EVENT
        else:
            if "val" not in rec:
                raise ConfigError(f"scenario line {lineno}: {decl.kind} injection needs 'val'")
            try:
                value = coerce(from_json(rec["val"]), decl.vtype)
            except ValueTypeError as e:
                raise ConfigError(f"scenario line {lineno}: {e}") from None
        out.append(Injection(t, rec["port"], value))
    out.sort(key=lambda i: i.t)
    return out


def load_scenario(path, model):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return parse_scenario(text, model), hashlib.sha256(text.encode()).hexdigest()


class Director:
    """Runs one instance model.

    ``behaviors`` maps thread ids to host-callback behaviors overriding the
    model's built-in transition machines.  ``sink`` is an open text file the
    trace streams to.
    """

    def __init__(self, model: InstanceModel, behaviors=None, scenario=(), *,
                 seed: int = 0, horizon_ns: int | None = None,
                 timed_enabled: bool = True, sink=None,
                 max_rounds_per_instant: int = 1000, scenario_hash=None):
        if not timed_enabled:
            timed = [t for t in model.thread_ids() if model.dispatch_protocol(t) == "Timed"]
            if timed:
                raise ConfigError(f"Timed dispatch is disabled but threads {timed} use it")
        if horizon_ns is not None and horizon_ns <= 0:
            raise ConfigError("horizon must be positive")
        behaviors = behaviors or {}
        unknown = set(behaviors) - set(model.threads)
        if unknown:
            raise ConfigError(f"behaviors given for unknown threads {sorted(unknown)}")
        self.model = model
        self.tids = model.thread_ids()
        self.behaviors = {t: behaviors.get(t) or model.threads[t].behavior for t in self.tids}
        self.seed = seed
        self.rng = random.Random(seed)
        self.horizon_ns = horizon_ns
        self.max_rounds_per_instant = max_rounds_per_instant
        self.phase = "off"
        self.sch = {t: "Halted" for t in self.tids}
        self.threads = {t: ThreadState.initial(model.threads[t]) for t in self.tids}
        self.timers = TimerBank()
        self.faults = []
        self.now = ORIGIN
        self._injections = list(scenario)
        self._inj_pos = 0
        self._t = 0
        self._n = 0
        self._last_t = None
        self._rounds_here = 0
        self._fresh = {t: set() for t in self.tids}
        self._last_periodic = {}
        self._next_timed = {t: 0 for t in self.tids if model.dispatch_protocol(t) == "Timed"}
        self._cascade = False
        self._powered = False
        self._initialized = False
        self._stopped = False
        header = {
            "format": TRACE_FORMAT,
            "version": TRACE_VERSION,
            "engine": __version__,
            "model_hash": model.digest(),
            "model": model.to_json(),
            "seed": seed,
            "horizon_ns": horizon_ns,
            "tie_break": TIE_BREAK,
            "scenario_hash": scenario_hash,
            "timed_enabled": timed_enabled,
        }
        self.recorder = TraceRecorder(header, sink)

    @property
    def trace(self):
        return self.recorder.trace

    @property
    def comms(self) -> dict:
        """Combined infrastructure port state of every thread, by ``thread.port``."""
        out = {}
        for t in self.tids:
            s = self.threads[t]
            for p, q in {**s.ips_in, **s.ips_out}.items():
                out[f"{t}.{p}"] = q
        return out

    # -- recording helpers

    def _world(self) -> Time:
        w = Time(self._t, self._n)
        self._n += 1
        self.now = w
        return w

    def _set_phase(self, w, phase):
        self.phase = phase
        self.recorder.write(w, VariableId("Dir", "director", "phase"), phase)

    def _set_sch(self, w, tid, value):
        self.sch[tid] = value
        self.recorder.write(w, VariableId("Sch", tid, "sch"), value)

    def _record(self, w, tid, old: ThreadState | None, new: ThreadState):
        rec = self.recorder
        for role, attr in (("IPS", "ips_in"), ("APS", "aps_in"),
                           ("APS", "aps_out"), ("IPS", "ips_out")):
            newq = getattr(new, attr)
            oldq = getattr(old, attr) if old is not None else {}
            for p, q in newq.items():
                if p not in oldq or not oldq[p].same(q):
                    rec.write(w, VariableId(role, tid, p), q)
        oldv = old.vars if old is not None else {}
        for k, v in new.vars.items():
            if k not in oldv or not same_value(oldv[k], v):
                rec.write(w, VariableId("Var", tid, k), v)
        if old is None or old.status != new.status:
            rec.write(w, VariableId("Sts", tid, "status"), new.status)

    def _abort(self, message):
        w = self._world()
        self.recorder.mark(w, "abort", reason=message)
        self.recorder.seal(w)
        self._stopped = True
        self.phase = "off"
        raise RunAborted(message)

    # -- timers

    def _arm(self, tid, port, w, state):
        for decl in self.timers.watching(tid, port):
            d = decl.duration_ns
            if decl.duration_port is not None:
                q = state.aps_in[decl.duration_port] or state.ips_in[decl.duration_port]
                d = q.head().value if q else None
                if isinstance(d, bool) or not isinstance(d, int) or d <= 0:
                    self._abort(f"timeout {decl.id!r} of {tid!r}: duration port holds {d!r}")
            self.timers.arm(decl, w.t, d)

    def _register_timeouts(self, tid, decls):
        for d in decls:
            self.timers.add(d)

    # -- lifecycle

    def power_on(self):
        if self._powered:
            raise LifecycleError("already powered on")
        self._powered = True
        w = ORIGIN
        self._set_phase(w, "off")
        for tid in self.tids:
            self._set_sch(w, tid, "Halted")
        self._set_phase(w, "initialize")
        return self

    def initialize_system(self):
        """Initialize every thread and perform the first Move, all at world (0,0)."""
        if not self._powered:
            self.power_on()
        if self._initialized or self.phase != "initialize":
            raise LifecycleError(f"initialize_system in phase {self.phase!r}")
        w = ORIGIN
        for tid in self.tids:
            decl = self.model.threads[tid]
            self._set_sch(w, tid, "Initializing")
            self._register_timeouts(tid, decl.timeouts)
            taken = [d.id for d in decl.timeouts]

            def factory(reset, duration, name, decl=decl, taken=taken, tid=tid):
                try:
                    d = create_timeout(decl, reset, duration, name, taken=taken)
                except TimeoutSpecError as e:
                    raise InitializationError(tid, None, str(e)) from None
                taken.append(d.id)
                self.timers.add(d)
                return d

            try:
                s = initialize_entrypoint(self.threads[tid], self.behaviors[tid], factory)
            except InitializationError as e:
                self.recorder.mark(w, "fault", thread=tid, error=str(e))
                self.recorder.seal(w)
                self._stopped = True
                raise
            self._record(w, tid, None, s)
            self.threads[tid] = s
            self.recorder.mark(w, "initialize", thread=tid,
                               timeouts=[d.to_json() for d in self.timers.decls.values()
                                         if d.owner == tid])
            self._set_sch(w, tid, "WaitingForDispatch")
        self.move(w)
        for tid in self.tids:
            s = self.threads[tid]
            base = {p: q.head().value for p, q in s.ips_in.items()
                    if s.decl.ports[p].kind == "data" and q}
            self.threads[tid] = replace(s, baseline=base)
        self._initialized = True
        self._t, self._n = 0, 1
        return self

    def move(self, w: Time | None = None) -> set:
        """Transfer every loaded out IPS to all connected in IPS.

        Returns the threads whose event or event data ports received items.
        """
        if w is None:
            w = self._world()
        self._set_phase(w, "move")
        deliveries = {}
        new = {tid: self.threads[tid] for tid in self.tids}
        for tid in self.tids:
            s = new[tid]
            outs = dict(s.ips_out)
            for p, q in s.ips_out.items():
                if not q:
                    continue
                for dst in self.model.conn_dest(f"{tid}.{p}"):
                    deliveries.setdefault(dst, []).append((f"{tid}.{p}", q.head()))
                outs[p] = q.empty()
            new[tid] = replace(s, ips_out=outs)
        receivers = set()
        sent = 0
        for dst in sorted(deliveries):
            items = sorted(deliveries[dst], key=lambda x: x[0])
            if len(items) > 1:
                self.rng.shuffle(items)
            tid, p = dst.split(".")
            decl = self.model.port(dst)
            s = new[tid]
            q = s.ips_in[p]
            for src, tv in items:
                try:
                    q = enqueue(q, tv, decl.kind)
                except QueueOverflow as e:
                    self.threads.update(new)
                    self._abort(f"overflow on {dst} (queueSize {decl.queue_size}) "
                                f"delivering from {src}: {e}")
                sent += 1
            ips = dict(s.ips_in)
            ips[p] = q
            new[tid] = replace(s, ips_in=ips)
            if decl.kind != "data":
                receivers.add(tid)
        for tid in self.tids:
            self._record(w, tid, self.threads[tid], new[tid])
        for dst in sorted(deliveries):
            tid, p = dst.split(".")
            if self.model.port(dst).kind != "data":
                self._arm(tid, p, w, new[tid])
        self.threads.update(new)
        self.recorder.mark(w, "move", delivered=sent)
        return receivers

    def compute_dispatch_status(self, tid) -> DispatchStatus:
        if self.sch.get(tid) != "WaitingForDispatch":
            raise EngineContractError(f"thread {tid!r} is not waiting for dispatch")
        decl = self.model.threads[tid]
        s = self.threads[tid]
        t = self._t
        retained = s.status.triggers
        fresh = self._fresh[tid]
        arrived = {p for p, d in decl.ports.items()
                   if d.direction == "in" and d.kind != "data" and s.ips_in[p]}
        if decl.dispatch == "Periodic":
            if t % decl.period_ns == 0 and self._last_periodic.get(tid) != t:
                return DispatchStatus(frozenset(retained | fresh), TIME_TRIGGERED)
            if fresh:
                return DispatchStatus(frozenset(retained | fresh), EVENT_TRIGGERED)
            return DispatchStatus(frozenset(), NOT_ENABLED)
        if arrived or fresh:
            return DispatchStatus(frozenset(retained | arrived | fresh), EVENT_TRIGGERED)
        if decl.dispatch == "Timed" and t >= self._next_timed[tid]:
            return DispatchStatus(frozenset(retained), TIME_TRIGGERED)
        return DispatchStatus(frozenset(), NOT_ENABLED)

    def next_instant(self) -> int | None:
        after = self._last_t
        cands = []
        if self._inj_pos < len(self._injections):
            cands.append(self._injections[self._inj_pos].t)
        e = self.timers.next_expiry()
        if e is not None:
            cands.append(e)
        for tid in self.tids:
            if self.sch[tid] == "Halted":
                continue
            decl = self.model.threads[tid]
            if decl.dispatch == "Periodic":
                P = decl.period_ns
                cands.append(0 if after is None else (after // P + 1) * P)
            elif decl.dispatch == "Timed":
                cands.append(self._next_timed[tid])
        cands = [c for c in cands if after is None or c > after]
        return min(cands, default=None)

    def _advance(self, t):
        self._t, self._n = t, 0
        self._last_t = t
        self._rounds_here = 0
        due = self.timers.pop_due(t)
        if due:
            w = self._world()
            for decl in due:
                self._fresh[decl.owner].add(decl.id)
                self.recorder.mark(w, "timeout", thread=decl.owner, id=decl.id)
        batch = []
        while (self._inj_pos < len(self._injections)
               and self._injections[self._inj_pos].t == t):
            batch.append(self._injections[self._inj_pos])
            self._inj_pos += 1
        if batch:
            w = self._world()
            for inj in batch:
                tid, p = inj.port.split(".")
                decl = self.model.port(inj.port)
                s = self.threads[tid]
                try:
                    q = enqueue(s.ips_in[p], TimestampedValue(inj.value, w), decl.kind)
                except QueueOverflow as e:
                    self._abort(f"overflow injecting into {inj.port}: {e}")
                ips = dict(s.ips_in)
                ips[p] = q
                new = replace(s, ips_in=ips)
                self._record(w, tid, s, new)
                self.threads[tid] = new
                self.recorder.mark(w, "inject", port=inj.port)
                if decl.kind != "data":
                    self._arm(tid, p, w, new)

    def dispatch_round(self) -> bool:
        """Run one dispatch -> compute -> move round.

        Advances to the next calendar instant unless the previous Move left
        work at the current one.  Returns False when no instant remains
        within the horizon.
        """
        if not self._initialized:
            raise LifecycleError("dispatch before initialization")
        if self._stopped:
            raise LifecycleError("dispatch after stop")
        if self._cascade:
            self._cascade = False
        else:
            t = self.next_instant()
            if t is None or (self.horizon_ns is not None and t > self.horizon_ns):
                return False
            self._advance(t)
        self._rounds_here += 1
        if self._rounds_here > self.max_rounds_per_instant:
            self._abort(f"more than {self.max_rounds_per_instant} rounds at t={self._t}ns")
        w = self._world()
        self._set_phase(w, "dispatch")
        self.recorder.mark(w, "round")
        enabled = {}
        for tid in self.tids:
            if self.sch[tid] == "WaitingForDispatch":
                st = self.compute_dispatch_status(tid)
                if st.enabled:
                    enabled[tid] = st
        w = self._world()
        self._set_phase(w, "compute")
        for tid, st in enabled.items():
            self._invoke(tid, st)
        receivers = self.move()
        self._cascade = any(self.sch[t] == "WaitingForDispatch"
                            and self.model.threads[t].dispatch != "Periodic"
                            for t in receivers)
        return True

    step = dispatch_round

    def _invoke(self, tid, status):
        decl = self.model.threads[tid]
        w = self._world()
        self._set_sch(w, tid, "Computing")
        self.recorder.write(w, VariableId("Sts", tid, "status"), status)
        self.recorder.mark(w, "dispatch", thread=tid, kind=status.kind,
                           triggers=sorted(status.triggers))
        self._fresh[tid] = set()
        if status.kind == TIME_TRIGGERED and decl.dispatch == "Periodic":
            self._last_periodic[tid] = self._t
        if decl.dispatch == "Timed":
            self._next_timed[tid] = self._t + decl.period_ns
        prev = [replace(self.threads[tid], status=status)]
        names = {"receive": "receive_input", "compute": "compute",
                 "send": "send_output", "complete": "complete"}

        def observe(stage, world, state):
            self._record(world, tid, prev[0], state)
            self.recorder.mark(world, names[stage], thread=tid)
            if stage == "send":
                for p, q in state.ips_out.items():
                    if q and decl.ports[p].kind != "data":
                        self._arm(tid, p, world, state)
            prev[0] = state

        try:
            new, accepted = compute_entrypoint(self.threads[tid], status, self.behaviors[tid],
                                               tick=self._world, observe=observe)
        except ThreadFault as f:
            w = self._world()
            self.recorder.mark(w, "fault", thread=tid, error=str(f.cause))
            self.threads[tid] = f.state
            self.faults.append(f)
            self._set_sch(w, tid, "Halted")
            return
        self.threads[tid] = new
        if accepted:
            w = self.now
        else:
            w = self._world()
            self.recorder.mark(w, "defer", thread=tid)
        self._set_sch(w, tid, "WaitingForDispatch")

    def stop_system(self):
        """stop(system): finalize every thread, halt, seal the trace."""
        if self._stopped:
            return self
        if not self._initialized:
            raise LifecycleError("finalize before initialization")
        if self.horizon_ns is not None and self.horizon_ns > self._t:
            self._t, self._n = self.horizon_ns, 0
        w = self._world()
        self._set_phase(w, "finalize")
        for tid in self.tids:
            self.threads[tid] = finalize_entrypoint(self.threads[tid])
            self.recorder.mark(w, "finalize", thread=tid)
            self._set_sch(w, tid, "Halted")
        w = self._world()
        self._set_phase(w, "off")
        self.recorder.seal(w)
        self._stopped = True
        return self

    def run(self):
        """Initialize, dispatch up to the horizon, stop; return the trace."""
        if self.horizon_ns is None:
            raise ConfigError("run() needs a horizon")
        self.initialize_system()
        while self.dispatch_round():
            pass
        self.stop_system()
        return self.trace


def simulate(model, scenario=(), *, behaviors=None, **kwargs):
    return Director(model, behaviors, scenario, **kwargs).run()
