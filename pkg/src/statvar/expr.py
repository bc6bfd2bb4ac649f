"""Small arithmetic expression language with analytic derivatives.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

Identifiers are ``x1 .. xm``; functions are ``exp``, ``log`` and ``sqrt``.
Derivatives are produced by differentiating the expression tree and each
derivative is compiled once to a Python closure.
"""
from __future__ import annotations

import math
import re
from typing import Sequence

from .errors import DomainError, ParseError
from .jets import MAX_ORDER, Box, JetFn

_FUNCS = ("exp", "log", "sqrt")
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


# --- expression tree -----------------------------------------------------------
# Nodes are tuples: ("c", value) | ("x", index) | (op, a, b) for op in + - * / ^
# | ("neg", a) | (func, a) for func in exp/log/sqrt.

def C(v):
    return ("c", float(v))


ZERO, ONE = C(0.0), C(1.0)


def _is_c(n, v=None):
    return n[0] == "c" and (v is None or n[1] == v)


def add(a, b):
    if _is_c(a) and _is_c(b):
        return C(a[1] + b[1])
    if _is_c(a, 0.0):
        return b
    if _is_c(b, 0.0):
        return a
    return ("+", a, b)


def sub(a, b):
    if _is_c(a) and _is_c(b):
        return C(a[1] - b[1])
    if _is_c(b, 0.0):
        return a
    if _is_c(a, 0.0):
        return neg(b)
    return ("-", a, b)


def mul(a, b):
    if _is_c(a) and _is_c(b):
        return C(a[1] * b[1])
    if _is_c(a, 0.0) or _is_c(b, 0.0):
        return ZERO
    if _is_c(a, 1.0):
        return b
    if _is_c(b, 1.0):
        return a
    if _is_c(a, -1.0):
        return neg(b)
    if _is_c(b, -1.0):
        return neg(a)
    return ("*", a, b)


def div(a, b):
    if _is_c(a, 0.0):
        return ZERO
    if _is_c(b, 1.0):
        return a
    if _is_c(a) and _is_c(b) and b[1] != 0.0:
        return C(a[1] / b[1])
    return ("/", a, b)


def neg(a):
    if _is_c(a):
        return C(-a[1])
    if a[0] == "neg":
        return a[1]
    return ("neg", a)


def power(a, b):
    if _is_c(b, 0.0):
        return ONE
    if _is_c(b, 1.0):
        return a
    if _is_c(a) and _is_c(b) and (a[1] > 0 or float(b[1]).is_integer()):
        return C(a[1] ** b[1])
    return ("^", a, b)


def func(name, a):
    return (name, a)


def diff(n, i):
    """Derivative of node ``n`` with respect to variable index ``i``."""
    kind = n[0]
    if kind == "c":
        return ZERO
    if kind == "x":
        return ONE if n[1] == i else ZERO
    if kind == "neg":
        return neg(diff(n[1], i))
    if kind in ("+", "-"):
        da, db = diff(n[1], i), diff(n[2], i)
        return add(da, db) if kind == "+" else sub(da, db)
    if kind == "*":
        a, b = n[1], n[2]
        return add(mul(diff(a, i), b), mul(a, diff(b, i)))
    if kind == "/":
        a, b = n[1], n[2]
        da, db = diff(a, i), diff(b, i)
        return sub(div(da, b), div(mul(a, db), power(b, C(2))))
    if kind == "^":
        a, b = n[1], n[2]
        da = diff(a, i)
        if _is_c(b):
            return mul(mul(b, power(a, C(b[1] - 1.0))), da)
        db = diff(b, i)
        # d(a^b) = a^b (b' log a + b a'/a)
        return mul(n, add(mul(db, func("log", a)), div(mul(b, da), a)))
    if kind == "exp":
        return mul(n, diff(n[1], i))
    if kind == "log":
        return div(diff(n[1], i), n[1])
    if kind == "sqrt":
        return div(diff(n[1], i), mul(C(2), n))
    raise ValueError(f"unknown node {kind}")


def variables(n) -> set:
    if n[0] == "x":
        return {n[1]}
    if n[0] == "c":
        return set()
    out = set()
    for child in n[1:]:
        out |= variables(child)
    return out


def to_source(n) -> str:
    kind = n[0]
    if kind == "c":
        return repr(n[1])
    if kind == "x":
        return f"x[{n[1]}]"
    if kind == "neg":
        return f"(-{to_source(n[1])})"
    if kind in "+-*/":
        return f"({to_source(n[1])} {kind} {to_source(n[2])})"
    if kind == "^":
        b = n[2]
        if _is_c(b) and float(b[1]).is_integer():
            return f"_ipow({to_source(n[1])}, {int(b[1])})"
        return f"_rpow({to_source(n[1])}, {to_source(b)})"
    if kind in _FUNCS:
        return f"_{kind}({to_source(n[1])})"
    raise ValueError(f"unknown node {kind}")


def to_text(n) -> str:
    """Round-trippable text in the input grammar (1-based identifiers)."""
    kind = n[0]
    if kind == "c":
        return repr(n[1]) if n[1] >= 0 else f"({n[1]!r})"
    if kind == "x":
        return f"x{n[1] + 1}"
    if kind == "neg":
        return f"(-{to_text(n[1])})"
    if kind in "+-*/^":
        return f"({to_text(n[1])} {kind} {to_text(n[2])})"
    return f"{kind}({to_text(n[1])})"


# --- runtime helpers used by compiled code -------------------------------------

def _ipow(a, k):
    if k < 0 and a == 0.0:
        raise DomainError("division by zero in negative power")
    return a ** k


def _rpow(a, b):
    if float(b).is_integer():
        return _ipow(a, int(b))
    if a < 0:
        raise DomainError(f"non-integer power of negative base {a}")
    if a == 0 and b < 0:
        raise DomainError("division by zero in negative power")
    return a ** b


def _log(a):
    if a <= 0:
        raise DomainError(f"log of non-positive value {a}")
    return math.log(a)


def _sqrt(a):
    if a < 0:
        raise DomainError(f"sqrt of negative value {a}")
    return math.sqrt(a)


def _exp(a):
    return math.exp(a)


_RUNTIME = {"_ipow": _ipow, "_rpow": _rpow, "_log": _log, "_sqrt": _sqrt, "_exp": _exp}


def compile_node(n):
    code = compile(f"lambda x: {to_source(n)}", "<statvar-expr>", "eval")
    fn = eval(code, dict(_RUNTIME))  # noqa: S307 - source generated from a parsed tree

    def safe(x):
        try:
            return fn(x)
        except ZeroDivisionError as exc:
            raise DomainError("division by zero") from exc
        except OverflowError as exc:
            raise DomainError(str(exc)) from exc

    return safe


# --- parser ----------------------------------------------------------------------

def _tokenize(source: str):
    pos = 0
    toks = []
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", len(source)))
    return toks


class _Parser:
    def __init__(self, source: str, arity: int | None):
        self.toks = _tokenize(source)
        self.i = 0
        self.arity = arity

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return neg(self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return C(float(text))
        if kind == "ident":
            if text in _FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return func(text, arg)
            m = re.fullmatch(r"x([1-9]\d*)", text)
            if not m:
                raise ParseError(f"unknown identifier {text!r}", pos)
            idx = int(m.group(1)) - 1
            if self.arity is not None and idx >= self.arity:
                raise ParseError(f"identifier {text!r} exceeds arity {self.arity}", pos)
            return ("x", idx)
        if text == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {text or 'end of input'!r}", pos)


def parse(source: str, arity: int | None = None):
    """Parse ``source`` into an expression tree."""
    if not isinstance(source, str):
        raise ParseError(f"expression must be a string, got {type(source).__name__}")
    return _Parser(source, arity).parse()


class ExprJet:
    """Evaluator with per-multi-index derivative trees compiled lazily."""

    def __init__(self, node):
        self.node = node
        self._trees = {(): node}
        self._compiled = {}

    def tree(self, axes: tuple):
        t = self._trees.get(axes)
        if t is None:
            t = diff(self.tree(axes[:-1]), axes[-1])
            self._trees[axes] = t
        return t

    def __call__(self, x, axes):
        fn = self._compiled.get(axes)
        if fn is None:
            t = self.tree(axes)
            fn = (lambda _x, v=t[1]: v) if t[0] == "c" else compile_node(t)
            self._compiled[axes] = fn
        return fn(x)


def parse_expr(source: str, arity: int | None = None, domain: Box | None = None,
               max_order: int = MAX_ORDER) -> JetFn:
    """Parse an expression into a JetFn with analytic jets up to ``max_order``."""
    node = parse(source, arity)
    used = variables(node)
    if arity is None:
        arity = domain.dim if domain is not None else (max(used) + 1 if used else 1)
    if used and max(used) >= arity:
        raise ParseError(f"expression uses x{max(used) + 1} but arity is {arity}")
    if _is_c(node, 0.0):
        from .jets import zero
        return zero(arity, domain)
    return JetFn(ExprJet(node), arity, max_order, domain, label=source)


def expr_jets(sources: Sequence, arity: int, domain: Box | None = None):
    """Parse a nested list of expression strings into the same nesting of JetFns."""
    if isinstance(sources, str):
        return parse_expr(sources, arity, domain)
    if isinstance(sources, (int, float)):
        return parse_expr(repr(float(sources)), arity, domain)
    return [expr_jets(s, arity, domain) for s in sources]
