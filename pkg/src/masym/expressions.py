"""A small closed expression grammar for right-hand-side terms.

Expressions are functions of a spatial point ``x``, the unknown vector
``z`` and a gradient ``p``.  The grammar covers constants, coordinates
``x1..xn``, unknowns ``z1..zm``, gradient entries ``p1..pn``, the
arithmetic operators ``+ - * / ^`` and the functions ``exp``, ``log``,
``abs``, ``min``, ``max``.  Trees evaluate vectorized over numpy arrays
and serialize to a JSON AST.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["Expr", "ExpressionError", "ExpressionDomainError", "parse", "const", "var"]


class ExpressionError(ValueError):
    """Malformed expression text or AST."""


class ExpressionDomainError(ValueError):
    """Evaluation left the expression's real domain.

    Names the offending subexpression (e.g. a fractional power of a
    negative base, or a log of a non-positive argument).
    """

    def __init__(self, message, subexpression):
        super().__init__(f"{message} in subexpression '{subexpression}'")
        self.subexpression = subexpression


_FUNCTIONS = {"exp": 1, "log": 1, "abs": 1, "min": 2, "max": 2}
_VAR_RE = re.compile(r"^(x|z|p)([1-9][0-9]*)$")


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple = ()
    value: Optional[float] = None  # for op == "const"
    name: Optional[str] = None     # for op == "var"

    def __str__(self):
        if self.op == "const":
            return repr(self.value)
        if self.op == "var":
            return self.name
        if self.op == "neg":
            return f"(- {self.args[0]})"
        if self.op in ("+", "-", "*", "/", "^"):
            return f"({self.args[0]} {self.op} {self.args[1]})"
        return f"{self.op}({', '.join(str(a) for a in self.args)})"

    def variables(self):
        if self.op == "var":
            return {self.name}
        out = set()
        for a in self.args:
            out |= a.variables()
        return out

    def depends_on(self, kind):
        """True if any variable of the given kind ('x', 'z' or 'p') appears."""
        return any(v[0] == kind for v in self.variables())

    def __call__(self, x, z, p):
        """Evaluate with broadcasting; x: (..., n), z: (..., m), p: (..., n)."""
        if self.op == "const":
            return np.asarray(self.value, dtype=float)
        if self.op == "var":
            kind, idx = self.name[0], int(self.name[1:]) - 1
            arr = {"x": x, "z": z, "p": p}[kind]
            arr = np.asarray(arr, dtype=float)
            if idx >= arr.shape[-1]:
                raise ExpressionError(f"variable {self.name} out of range for shape {arr.shape}")
            return arr[..., idx]
        vals = [a(x, z, p) for a in self.args]
        if self.op == "+":
            return vals[0] + vals[1]
        if self.op == "-":
            return vals[0] - vals[1]
        if self.op == "neg":
            return -vals[0]
        if self.op == "*":
            return vals[0] * vals[1]
        if self.op == "/":
            if np.any(vals[1] == 0.0):
                raise ExpressionDomainError("division by zero", str(self))
            return vals[0] / vals[1]
        if self.op == "^":
            base, expo = vals
            if np.any((np.asarray(base) < 0) & (np.asarray(expo) != np.round(expo))):
                raise ExpressionDomainError("fractional power of a negative base", str(self))
            with np.errstate(invalid="raise", divide="raise"):
                try:
                    return np.power(base, expo)
                except FloatingPointError:
                    raise ExpressionDomainError("invalid power", str(self)) from None
        if self.op == "exp":
            return np.exp(vals[0])
        if self.op == "log":
            if np.any(vals[0] <= 0.0):
                raise ExpressionDomainError("log of a non-positive argument", str(self))
            return np.log(vals[0])
        if self.op == "abs":
            return np.abs(vals[0])
        if self.op == "min":
            return np.minimum(vals[0], vals[1])
        if self.op == "max":
            return np.maximum(vals[0], vals[1])
        raise ExpressionError(f"unknown operator {self.op!r}")

    def to_json(self):
        if self.op == "const":
            return self.value
        if self.op == "var":
            return self.name
        return [self.op] + [a.to_json() for a in self.args]

    @staticmethod
    def from_json(obj):
        if isinstance(obj, (int, float)):
            return const(float(obj))
        if isinstance(obj, str):
            return var(obj)
        if isinstance(obj, (list, tuple)) and obj:
            op = obj[0]
            args = tuple(Expr.from_json(a) for a in obj[1:])
            if op == "neg" and len(args) == 1:
                return Expr("neg", args)
            if op in ("+", "-", "*", "/", "^") and len(args) == 2:
                return Expr(op, args)
            if op in _FUNCTIONS and len(args) == _FUNCTIONS[op]:
                return Expr(op, args)
        raise ExpressionError(f"bad AST node {obj!r}")


def const(v):
    return Expr("const", value=float(v))


def var(name):
    if not _VAR_RE.match(name):
        raise ExpressionError(f"unknown variable {name!r} (expected x<k>, z<j> or p<k>)")
    return Expr("var", name=name)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"cannot tokenize {text[pos:]!r}")
        pos = m.end()
        if m.group("num"):
            out.append(("num", float(m.group("num"))))
        elif m.group("name"):
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    out.append(("end", None))
    return out


class _Parser:
    """Recursive-descent parser with standard precedence; ^ binds right."""

    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, expect=None):
        tok = self.toks[self.i]
        if expect is not None and tok != ("op", expect):
            raise ExpressionError(f"expected {expect!r}, got {tok}")
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input at token {self.peek()}")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            e = Expr(op, (e, self.term()))
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            e = Expr(op, (e, self.unary()))
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Expr("neg", (self.unary(),))
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return Expr("^", (base, self.unary()))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return const(val)
        if kind == "name":
            self.take()
            if val in _FUNCTIONS:
                self.take("(")
                args = [self.expr()]
                for _ in range(_FUNCTIONS[val] - 1):
                    self.take(",")
                    args.append(self.expr())
                self.take(")")
                return Expr(val, tuple(args))
            return var(val)
        if (kind, val) == ("op", "("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise ExpressionError(f"unexpected token {(kind, val)}")


def parse(text):
    """Parse infix text like ``"( - z2 ) ^ 2"`` into an :class:`Expr`."""
    return _Parser(_tokenize(text)).parse()
