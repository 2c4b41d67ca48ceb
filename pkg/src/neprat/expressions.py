"""A small expression language for scalar nonlinearities.

Grammar (precedence: power > unary minus > mul/div > add/sub, power is
right-associative)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := ('-'|'+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'i' | 'lam' | IDENT '(' expr ')' | IDENT | '(' expr ')'

``lam`` is the complex variable, ``i`` the imaginary unit; any other bare
identifier is a named real parameter resolved at bind time.  ``sqrt`` and
``exp`` are the built-in functions; square roots and real powers use the
principal branch (cut along the negative real axis of the radicand).
Exponents of ``^`` must not depend on ``lam`` and must be real.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCTIONS = {"sqrt": np.sqrt, "exp": np.exp}

# user-registered scalar callables addressable as "builtin:<name>"
_BUILTIN_REGISTRY = {}


def register_builtin(name, func):
    """Register a callable so configs can reference it as ``builtin:<name>``."""
    _BUILTIN_REGISTRY[name] = func


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
            break
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


# -- AST ---------------------------------------------------------------------

class Node:
    def contains_var(self):
        raise NotImplementedError


@dataclass
class Num(Node):
    value: complex

    def contains_var(self):
        return False


@dataclass
class Param(Node):
    name: str

    def contains_var(self):
        return False


@dataclass
class Var(Node):
    def contains_var(self):
        return True


@dataclass
class Neg(Node):
    operand: Node

    def contains_var(self):
        return self.operand.contains_var()


@dataclass
class Bin(Node):
    op: str
    left: Node
    right: Node

    def contains_var(self):
        return self.left.contains_var() or self.right.contains_var()


@dataclass
class Pow(Node):
    base: Node
    exponent: Node

    def contains_var(self):
        return self.base.contains_var() or self.exponent.contains_var()


@dataclass
class Call(Node):
    func: str
    arg: Node

    def contains_var(self):
        return self.arg.contains_var()


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression", len(self.text))
        self.pos += 1
        return tok

    def expect_op(self, op):
        tok = self.next()
        if tok[0] != "op" or tok[1] != op:
            raise ExpressionError(f"expected {op!r}, found {tok[1]!r}", tok[2])

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"unexpected trailing token {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "+-":
            self.next()
            rhs = self.term()
            node = Bin(tok[1], node, rhs)
        return node

    def term(self):
        node = self.unary()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "*/":
            self.next()
            rhs = self.unary()
            node = Bin(tok[1], node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in "+-":
            self.next()
            operand = self.unary()
            return Neg(operand) if tok[1] == "-" else operand
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.next()
            exponent = self.unary()
            if exponent.contains_var():
                raise ExpressionError("power exponent may not depend on lam", tok[2])
            return Pow(base, exponent)
        return base

    def atom(self):
        tok = self.next()
        kind, value, position = tok
        if kind == "num":
            return Num(complex(value))
        if kind == "name":
            if value == "i":
                return Num(1j)
            if value == "lam":
                return Var()
            nxt = self.peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if value not in _FUNCTIONS:
                    raise ExpressionError(f"unknown function {value!r}", position)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            return Param(value)
        if value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {value!r}", position)


def _eval(node, lam, params):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return lam
    if isinstance(node, Param):
        try:
            return complex(params[node.name])
        except KeyError:
            raise ExpressionError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, lam, params)
    if isinstance(node, Bin):
        lhs = _eval(node.left, lam, params)
        rhs = _eval(node.right, lam, params)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        return lhs / rhs
    if isinstance(node, Pow):
        base = _eval(node.base, lam, params)
        expo = _eval(node.exponent, lam, params)
        expo = np.asarray(expo).item()
        if expo.imag != 0:
            raise ExpressionError("power exponent must be real")
        return np.power(base, expo.real)
    if isinstance(node, Call):
        return _FUNCTIONS[node.func](_eval(node.arg, lam, params))
    raise TypeError(f"unknown node {node!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _format(node, parent_prec=0):
    if isinstance(node, Num):
        v = node.value
        if v.imag == 0:
            s = repr(v.real)
        elif v == 1j:
            s = "i"
        elif v.real == 0:
            s = f"{v.imag!r}*i"
        else:
            s = f"({v.real!r}+{v.imag!r}*i)"
        return s
    if isinstance(node, Var):
        return "lam"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        inner = _format(node.operand, _PRECEDENCE["neg"])
        s = f"-{inner}"
        return f"({s})" if parent_prec > _PRECEDENCE["neg"] else s
    if isinstance(node, Bin):
        prec = _PRECEDENCE[node.op]
        lhs = _format(node.left, prec)
        rhs = _format(node.right, prec + 1)  # left-assoc
        s = f"{lhs} {node.op} {rhs}"
        return f"({s})" if parent_prec > prec else s
    if isinstance(node, Pow):
        base = _format(node.base, _PRECEDENCE["^"] + 1)
        expo = _format(node.exponent, _PRECEDENCE["^"] + 1)
        s = f"{base}^{expo}"
        return f"({s})" if parent_prec > _PRECEDENCE["^"] else s
    if isinstance(node, Call):
        return f"{node.func}({_format(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


@dataclass
class ScalarFunction:
    """Deterministic scalar function of one complex variable.

    Wraps either an expression AST (with a table of real parameter values) or
    a registered built-in callable.  Instances are vectorized over numpy
    arrays and immutable; :meth:`bind` returns a new instance.
    """

    ast: Node = None
    params: dict = field(default_factory=dict)
    builtin: str = None

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        if self.builtin is not None:
            out = np.asarray(_BUILTIN_REGISTRY[self.builtin](lam), dtype=complex)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.asarray(_eval(self.ast, lam, self.params), dtype=complex)
            out = np.broadcast_to(out, lam.shape).copy() if out.shape != lam.shape else out
        return out if out.ndim else complex(out)

    def bind(self, **params):
        for name, value in params.items():
            value = complex(value)
            if value.imag != 0:
                raise ExpressionError(f"parameter {name!r} must be real")
        merged = dict(self.params)
        merged.update({k: float(np.real(v)) for k, v in params.items()})
        return ScalarFunction(ast=self.ast, params=merged, builtin=self.builtin)

    def free_parameters(self):
        names = set()

        def walk(node):
            if isinstance(node, Param):
                names.add(node.name)
            elif isinstance(node, Neg):
                walk(node.operand)
            elif isinstance(node, Bin):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, Pow):
                walk(node.base)
                walk(node.exponent)
            elif isinstance(node, Call):
                walk(node.arg)

        if self.ast is not None:
            walk(self.ast)
        return names - set(self.params)

    def format(self):
        """Expression text that reparses to an equivalent function."""
        if self.builtin is not None:
            return f"builtin:{self.builtin}"
        return _format(self.ast)

    def __str__(self):
        return self.format()


def parse_scalar_function(text, params=None):
    """Parse expression text into a :class:`ScalarFunction`.

    ``builtin:<name>`` resolves through the registry instead of the grammar.
    Raises :class:`ExpressionError` with a character position on bad input.
    """
    text = text.strip()
    if text.startswith("builtin:"):
        name = text[len("builtin:"):]
        if name not in _BUILTIN_REGISTRY:
            raise ExpressionError(f"unknown builtin {name!r}")
        return ScalarFunction(builtin=name)
    if not text:
        raise ExpressionError("empty expression", 0)
    ast = _Parser(text).parse()
    return ScalarFunction(ast=ast, params=dict(params or {}))
