"""Expression language for behavior actions and trace queries.

Operators, loosest first::

    ->                      implication (right associative)
    or  ||  ∨
    and &&  ∧
    not !   ¬
    <  <=  =  ==  !=  <>  >=  >   (and ≤ ≥ ≠)
    +  -
    *  /  mod   (and × ÷)
    unary -
    e@T         evaluate e at world T; T is ``ns`` or ``(ns, micro)``

Atoms are integer/float/string literals, ``true``/``false``, ``#Literal``
enumeration literals, names, calls and parenthesised expressions.  A name is
either a plain identifier or a qualified trace variable ``Role:owner:name``.

Built-in functions: ``nonempty(q)``, ``count(q)``, ``head(q)``,
``get_value(q)``, ``updated(p)``, ``abs(x)``, ``time_stamp()``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .values import EnumLiteral, PortQueue, Time, value_key


class ExprSyntaxError(Exception):
    pass


class EvalError(Exception):
    """Type error, division by zero or an unresolved name during evaluation."""


# -- AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Any


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Unary:
    op: str
    arg: Any


@dataclass(frozen=True)
class Binary:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class At:
    arg: Any
    time: Time


FUNCTIONS = {"nonempty": 1, "count": 1, "head": 1, "get_value": 1,
             "updated": 1, "abs": 1, "time_stamp": 0}


# -- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<float>\d+\.\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)
  | (?P<int>\d+(?:_\d+)*)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<qual>[A-Za-z]+:[A-Za-z_$][\w$]*:[A-Za-z_$][\w$.]*)
  | (?P<enum>\#[A-Za-z_]\w*)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<op>->|<=|>=|==|!=|<>|&&|\|\||[-+*/<>=()@,!∧∨¬≤≥≠×÷→])
""", re.VERBOSE)

_CANON = {"==": "=", "<>": "!=", "≠": "!=", "≤": "<=", "≥": ">=",
          "&&": "and", "∧": "and", "||": "or", "∨": "or",
          "!": "not", "¬": "not", "×": "*", "÷": "/",
          "→": "->"}
_WORD_OPS = {"and", "or", "not", "mod"}


def _tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            if kind == "ident" and val in _WORD_OPS:
                kind = "op"
            if kind == "op":
                val = _CANON.get(val, val)
            out.append((kind, val, pos))
        pos = m.end()
    out.append(("end", "", pos))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, val):
        if self.peek()[0] == "op" and self.peek()[1] == val:
            self.i += 1
            return True
        return False

    def expect(self, val):
        if not self.accept(val):
            kind, got, pos = self.peek()
            raise ExprSyntaxError(f"expected {val!r} at column {pos + 1}, got {got or 'end'!r}")

    def parse(self):
        e = self.implies()
        kind, got, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {got!r} at column {pos + 1}")
        return e

    def implies(self):
        left = self.or_()
        if self.accept("->"):
            return Binary("->", left, self.implies())
        return left

    def or_(self):
        e = self.and_()
        while self.accept("or"):
            e = Binary("or", e, self.and_())
        return e

    def and_(self):
        e = self.not_()
        while self.accept("and"):
            e = Binary("and", e, self.not_())
        return e

    def not_(self):
        if self.accept("not"):
            return Unary("not", self.not_())
        return self.rel()

    def rel(self):
        e = self.add()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("<", "<=", "=", "!=", ">=", ">"):
            self.take()
            e = Binary(val, e, self.add())
        return e

    def add(self):
        e = self.mul()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.take()
                e = Binary(val, e, self.mul())
            else:
                return e

    def mul(self):
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/", "mod"):
                self.take()
                e = Binary(val, e, self.unary())
            else:
                return e

    def unary(self):
        if self.accept("-"):
            return Unary("-", self.unary())
        return self.postfix()

    def postfix(self):
        e = self.atom()
        while self.accept("@"):
            e = At(e, self.time())
        return e

    def integer(self):
        kind, val, pos = self.take()
        if kind != "int":
            raise ExprSyntaxError(f"expected an integer at column {pos + 1}")
        return int(val.replace("_", ""))

    def time(self):
        if self.accept("("):
            t = self.integer()
            self.expect(",")
            n = self.integer()
            self.expect(")")
            return Time(t, n)
        return Time(self.integer(), 0)

    def atom(self):
        kind, val, pos = self.take()
        if kind == "int":
            return Const(int(val.replace("_", "")))
        if kind == "float":
            return Const(float(val))
        if kind == "str":
            return Const(bytes(val[1:-1], "utf-8").decode("unicode_escape"))
        if kind == "enum":
            return Const(EnumLiteral(val[1:]))
        if kind == "qual":
            return Name(val)
        if kind == "ident":
            if val == "true":
                return Const(True)
            if val == "false":
                return Const(False)
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    args.append(self.implies())
                    while self.accept(","):
                        args.append(self.implies())
                    self.expect(")")
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r} at column {pos + 1}")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(
                        f"{val}() takes {FUNCTIONS[val]} argument(s), got {len(args)}")
                if val == "updated" and not isinstance(args[0], Name):
                    raise ExprSyntaxError("updated() takes a port name")
                return Call(val, tuple(args))
            return Name(val)
        if kind == "op" and val == "(":
            e = self.implies()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {val or 'end'!r} at column {pos + 1}")


def parse(text: str):
    return _Parser(text).parse()


def names(node) -> set:
    """All names referenced by an expression."""
    if isinstance(node, Name):
        return {node.id}
    if isinstance(node, Call):
        return set().union(*(names(a) for a in node.args)) if node.args else set()
    if isinstance(node, Unary):
        return names(node.arg)
    if isinstance(node, Binary):
        return names(node.left) | names(node.right)
    if isinstance(node, At):
        return names(node.arg)
    return set()


# -- evaluation ------------------------------------------------------------------

class Environment:
    """Name resolution for :func:`evaluate`."""

    def lookup(self, name: str, when: Time | None):
        raise EvalError(f"unknown name {name!r}")

    def updated(self, name: str, when: Time | None) -> bool:
        raise EvalError("updated() is not available here")

    def time_stamp(self, when: Time | None) -> float:
        raise EvalError("time_stamp() is not available here")

    def at_allowed(self) -> bool:
        return False


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num(op, v):
    if not _is_num(v):
        raise EvalError(f"operator {op!r} needs a number, got {v!r}")
    return v


def _bool(op, v):
    if not isinstance(v, bool):
        raise EvalError(f"operator {op!r} needs a boolean, got {v!r}")
    return v


def _queue(func, v):
    if not isinstance(v, PortQueue):
        raise EvalError(f"{func}() needs a port queue, got {v!r}")
    return v


def _equal(a, b):
    if _is_num(a) and _is_num(b):
        return a == b
    if isinstance(a, PortQueue) and isinstance(b, PortQueue):
        return a.same(b)
    if isinstance(a, PortQueue) or isinstance(b, PortQueue):
        raise EvalError("cannot compare a queue with a value")
    return value_key(a) == value_key(b)


def _divide(a, b):
    if b == 0:
        raise EvalError("division by zero")
    if isinstance(a, int) and isinstance(b, int):
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    return a / b


def evaluate(node, env: Environment, when: Time | None = None):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Name):
        return env.lookup(node.id, when)
    if isinstance(node, At):
        if not env.at_allowed():
            raise EvalError("'@' is only available when evaluating over a trace")
        return evaluate(node.arg, env, node.time)
    if isinstance(node, Unary):
        v = evaluate(node.arg, env, when)
        if node.op == "not":
            return not _bool("not", v)
        return -_num("-", v)
    if isinstance(node, Call):
        return _call(node, env, when)
    op = node.op
    if op in ("and", "or", "->"):
        left = _bool(op, evaluate(node.left, env, when))
        if op == "and" and not left:
            return False
        if op == "or" and left:
            return True
        if op == "->" and not left:
            return True
        return _bool(op, evaluate(node.right, env, when))
    a = evaluate(node.left, env, when)
    b = evaluate(node.right, env, when)
    if op == "=":
        return _equal(a, b)
    if op == "!=":
        return not _equal(a, b)
    if op in ("<", "<=", ">", ">="):
        if not ((_is_num(a) and _is_num(b))
                or (isinstance(a, str) and isinstance(b, str))):
            raise EvalError(f"cannot order {a!r} and {b!r}")
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    _num(op, a)
    _num(op, b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _divide(a, b)
    if not (isinstance(a, int) and isinstance(b, int)):
        raise EvalError("mod needs integers")
    # remainder takes the dividend's sign, matching truncating division
    return a - b * _divide(a, b)


def _call(node, env, when):
    f = node.func
    if f == "updated":
        return env.updated(node.args[0].id, when)
    if f == "time_stamp":
        return env.time_stamp(when)
    v = evaluate(node.args[0], env, when)
    if f == "abs":
        return abs(_num("abs", v))
    q = _queue(f, v)
    if f == "nonempty":
        return len(q) > 0
    if f == "count":
        return len(q)
    if not q:
        raise EvalError(f"{f}() on an empty queue")
    return q.head().value
