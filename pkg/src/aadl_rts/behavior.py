"""Built-in transition-machine behaviors.

A behavior is a small state machine embedded in the model file::

    {"states": ["X", "Y"], "initial": "X",
     "variables": {"count": 0},
     "init_actions": [{"put": "level", "expr": "0"}],
     "transitions": [{"from": "X", "when": "on dispatch A and B",
                      "actions": [{"set": "count", "expr": "count + 1"}],
                      "to": "Y"}]}

Dispatch conditions (``when``) use ``on dispatch``, trigger ids, ``and``,
``or``, ``not``, parentheses and ``timetriggered``.  ``on dispatch`` on its
own accepts any dispatch; ``on dispatch <cond>`` is the same as ``<cond>``.

Actions are ``{"set": var, "expr": e}``, ``{"put": port, "expr": e}``,
``{"emit": port}`` and ``{"next": port}``.

Any object with ``initialize(ctx)``, ``select(vars, status)`` and
``execute(ctx, choice)`` can stand in for a :class:`BehaviorSpec`; see
:class:`Behavior`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from . import expr as ex

STATE_VAR = "$state"


class BehaviorError(Exception):
    pass


class Behavior:
    """Host-callback behavior interface.

    ``select`` sees only the thread's persistent variables and the dispatch
    status; it must not touch ports.  It returns an opaque choice, or
    ``None`` to defer the dispatch.  ``execute`` runs the chosen reaction
    inside the compute window.
    """

    def initialize(self, ctx) -> None:
        pass

    def select(self, vars: dict, status) -> Any:
        return None

    def execute(self, ctx, choice) -> None:
        pass


# -- dispatch conditions ----------------------------------------------------------

_COND_TOKEN = re.compile(r"\s*(\(|\)|[A-Za-z_$][\w$.]*)")


def parse_condition(text: str):
    """Parse a dispatch condition into a nested tuple.

    Nodes: ``("any",)``, ``("time",)``, ``("trig", id)``, ``("not", c)``,
    ``("and", a, b)``, ``("or", a, b)``.
    """
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _COND_TOKEN.match(text, pos)
        if not m:
            raise BehaviorError(f"bad dispatch condition {text!r} at column {pos + 1}")
        toks.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if toks[:2] == ["on", "dispatch"]:
        toks = toks[2:]
        if not toks:
            return ("any",)
    if not toks:
        raise BehaviorError("empty dispatch condition")
    i = 0

    def peek():
        return toks[i] if i < len(toks) else None

    def take():
        nonlocal i
        tok = peek()
        if tok is None:
            raise BehaviorError(f"dispatch condition {text!r} ends early")
        i += 1
        return tok

    def or_():
        c = and_()
        while peek() == "or":
            take()
            c = ("or", c, and_())
        return c

    def and_():
        c = not_()
        while peek() == "and":
            take()
            c = ("and", c, not_())
        return c

    def not_():
        if peek() == "not":
            take()
            return ("not", not_())
        tok = take()
        if tok == "(":
            c = or_()
            if take() != ")":
                raise BehaviorError(f"unbalanced parentheses in {text!r}")
            return c
        if tok in ("and", "or", ")"):
            raise BehaviorError(f"unexpected {tok!r} in {text!r}")
        if tok.lower() == "timetriggered":
            return ("time",)
        return ("trig", tok)

    c = or_()
    if i != len(toks):
        raise BehaviorError(f"trailing {toks[i]!r} in dispatch condition {text!r}")
    return c


def condition_triggers(cond) -> set:
    if cond[0] == "trig":
        return {cond[1]}
    if cond[0] in ("any", "time"):
        return set()
    return set().union(*(condition_triggers(c) for c in cond[1:]))


def holds(cond, status) -> bool:
    tag = cond[0]
    if tag == "any":
        return True
    if tag == "time":
        return status.kind == "TimeTriggered"
    if tag == "trig":
        return cond[1] in status.triggers
    if tag == "not":
        return not holds(cond[1], status)
    if tag == "and":
        return holds(cond[1], status) and holds(cond[2], status)
    return holds(cond[1], status) or holds(cond[2], status)


# -- transition machine ---------------------------------------------------------

@dataclass(frozen=True)
class Action:
    op: str            # set | put | emit | next
    target: str
    source: str = ""   # expression text for set/put
    tree: Any = field(default=None, compare=False, repr=False)

    def to_json(self):
        if self.op in ("set", "put"):
            return {self.op: self.target, "expr": self.source}
        return {self.op: self.target}


@dataclass(frozen=True)
class Transition:
    source: str
    when: str
    actions: tuple
    target: str
    cond: Any = field(default=None, compare=False, repr=False)

    def to_json(self):
        return {"from": self.source, "when": self.when,
                "actions": [a.to_json() for a in self.actions], "to": self.target}


def parse_action(obj) -> Action:
    if not isinstance(obj, dict):
        raise BehaviorError(f"action must be an object, got {obj!r}")
    for op in ("set", "put"):
        if op in obj:
            if set(obj) != {op, "expr"} or not isinstance(obj["expr"], str):
                raise BehaviorError(f"{op} action needs exactly {op!r} and 'expr': {obj!r}")
            try:
                tree = ex.parse(obj["expr"])
            except ex.ExprSyntaxError as e:
                raise BehaviorError(f"in action {obj!r}: {e}") from None
            return Action(op, obj[op], obj["expr"], tree)
    for op in ("emit", "next"):
        if op in obj:
            if set(obj) != {op}:
                raise BehaviorError(f"{op} action takes only a port: {obj!r}")
            return Action(op, obj[op])
    raise BehaviorError(f"unknown action {obj!r}")


@dataclass(frozen=True)
class BehaviorSpec(Behavior):
    states: tuple = ("idle",)
    initial: str = "idle"
    variables: tuple = ()          # ((name, initial value), ...)
    init_actions: tuple = ()
    transitions: tuple = ()

    @classmethod
    def from_json(cls, obj) -> "BehaviorSpec":
        from .values import from_json, ValueTypeError
        if obj is None:
            return cls()
        if not isinstance(obj, dict):
            raise BehaviorError("behavior must be an object")
        unknown = set(obj) - {"states", "initial", "variables", "init_actions", "transitions"}
        if unknown:
            raise BehaviorError(f"unknown behavior keys {sorted(unknown)}")
        states = obj.get("states", ["idle"])
        if not isinstance(states, list) or not states or not all(isinstance(s, str) for s in states):
            raise BehaviorError("behavior states must be a non-empty list of names")
        if len(set(states)) != len(states):
            raise BehaviorError("behavior state names must be unique")
        initial = obj.get("initial", states[0])
        if initial not in states:
            raise BehaviorError(f"initial state {initial!r} is not a declared state")
        raw_vars = obj.get("variables", {})
        if not isinstance(raw_vars, dict):
            raise BehaviorError("behavior variables must be an object")
        variables = []
        for name, lit in raw_vars.items():
            if not re.fullmatch(r"[A-Za-z_]\w*", name):
                raise BehaviorError(f"bad variable name {name!r}")
            try:
                variables.append((name, from_json(lit)))
            except ValueTypeError as e:
                raise BehaviorError(f"variable {name!r}: {e}") from None
        init_actions = tuple(parse_action(a) for a in obj.get("init_actions", []))
        transitions = []
        for tr in obj.get("transitions", []):
            if not isinstance(tr, dict) or not {"from", "to"} <= set(tr):
                raise BehaviorError(f"transition needs 'from' and 'to': {tr!r}")
            for end in ("from", "to"):
                if tr[end] not in states:
                    raise BehaviorError(f"transition {end} state {tr[end]!r} is not declared")
            when = tr.get("when", "on dispatch")
            transitions.append(Transition(
                tr["from"], when,
                tuple(parse_action(a) for a in tr.get("actions", [])),
                tr["to"], parse_condition(when)))
        return cls(tuple(states), initial, tuple(variables), init_actions, tuple(transitions))

    def to_json(self):
        from .values import to_json
        return {"states": list(self.states), "initial": self.initial,
                "variables": {k: to_json(v) for k, v in self.variables},
                "init_actions": [a.to_json() for a in self.init_actions],
                "transitions": [t.to_json() for t in self.transitions]}

    def declared_vars(self) -> set:
        return ({k for k, _ in self.variables}
                | {a.target for a in self.init_actions if a.op == "set"})

    # Behavior protocol

    def initialize(self, ctx):
        for name, v in self.variables:
            ctx.vars[name] = v
        ctx.vars[STATE_VAR] = self.initial
        for a in self.init_actions:
            run_action(a, ctx)

    def select(self, vars, status):
        current = vars.get(STATE_VAR, self.initial)
        if not self.transitions:
            # no machine given: accept every dispatch and do nothing
            return Transition(current, "on dispatch", (), current, ("any",))
        for tr in self.transitions:
            if tr.source == current and holds(tr.cond, status):
                return tr
        return None

    def execute(self, ctx, choice):
        for a in choice.actions:
            run_action(a, ctx)
        ctx.vars[STATE_VAR] = choice.target


class _ActionEnv(ex.Environment):
    def __init__(self, ctx):
        self.ctx = ctx

    def lookup(self, name, when):
        if name in self.ctx.vars:
            return self.ctx.vars[name]
        return self.ctx.aps_queue(name)

    def updated(self, name, when):
        return self.ctx.updated(name)

    def time_stamp(self, when):
        return self.ctx.time_stamp()


def run_action(a: Action, ctx):
    if a.op == "set":
        ctx.vars[a.target] = ex.evaluate(a.tree, _ActionEnv(ctx))
    elif a.op == "put":
        ctx.put_value(a.target, ex.evaluate(a.tree, _ActionEnv(ctx)))
    elif a.op == "emit":
        ctx.emit(a.target)
    else:
        ctx.next_value(a.target)
