"""Scalar coefficient expressions in the variable ``x``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('+' | '-') factor | atom ('^' ['+' | '-'] atom)?
    atom   := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp | log | sqrt | abs | tanh

Parsed expressions compile to numpy closures.  They accept real or complex
arrays; complex input is what makes complex-step differentiation possible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ParseError",
    "EvaluationDomainError",
    "ScalarField",
    "parse_coefficient",
    "FUNCTIONS",
]


def _abs(v):
    # analytic continuation of |x| so complex-step derivatives stay correct
    if np.iscomplexobj(v):
        return np.where(v.real < 0, -v, v)
    return np.abs(v)


FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": _abs,
    "tanh": np.tanh,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    """Syntax error with the character offset and the tokens that would have been accepted."""

    def __init__(self, text: str, pos: int, expected: set[str], found: str):
        self.text = text
        self.pos = pos
        self.expected = frozenset(expected)
        self.found = found
        want = ", ".join(sorted(self.expected))
        super().__init__(f"at position {pos}: expected one of {{{want}}}, found {found!r} in {text!r}")


class EvaluationDomainError(ArithmeticError):
    def __init__(self, text: str, x: float):
        self.text = text
        self.x = x
        super().__init__(f"expression {text!r} is not finite at x={x!r}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'num', 'name', 'op', 'end'
    value: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = text[pos:].lstrip()
            where = n - len(bad)
            raise ParseError(text, where, {"number", "x", "pi", "(", *FUNCTIONS}, bad[:1])
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


# AST nodes are plain tuples: ('num', v) ('x',) ('neg', a) ('bin', op, a, b) ('call', f, a)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected):
        t = self.cur
        raise ParseError(self.text, t.pos, set(expected), t.value or "<end>")

    def _accept(self, *ops):
        t = self.cur
        if t.kind == "op" and t.value in ops:
            self.i += 1
            return t.value
        return None

    def parse(self):
        node = self.expr()
        if self.cur.kind != "end":
            self._fail({"+", "-", "*", "/", "^", "<end>"})
        return node

    def expr(self):
        node = self.term()
        while (op := self._accept("+", "-")) is not None:
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while (op := self._accept("*", "/")) is not None:
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        if (op := self._accept("-", "+")) is not None:
            inner = self.factor()
            return ("neg", inner) if op == "-" else inner
        base = self.atom()
        if self._accept("^") is not None:
            sign = self._accept("-", "+")
            exp = self.atom()
            if sign == "-":
                exp = ("neg", exp)
            return ("bin", "^", base, exp)
        return base

    def atom(self):
        t = self.cur
        if t.kind == "num":
            self.i += 1
            return ("num", float(t.value))
        if t.kind == "name":
            if t.value == "x":
                self.i += 1
                return ("x",)
            if t.value == "pi":
                self.i += 1
                return ("num", math.pi)
            if t.value in FUNCTIONS:
                self.i += 1
                if self._accept("(") is None:
                    self._fail({"("})
                arg = self.expr()
                if self._accept(")") is None:
                    self._fail({")", "+", "-", "*", "/", "^"})
                return ("call", t.value, arg)
            self._fail({"number", "x", "pi", "(", *FUNCTIONS})
        if self._accept("(") is not None:
            node = self.expr()
            if self._accept(")") is None:
                self._fail({")", "+", "-", "*", "/", "^"})
            return node
        self._fail({"number", "x", "pi", "(", "-", "+", *FUNCTIONS})


_BINOPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


def _compile(node) -> Callable:
    kind = node[0]
    if kind == "num":
        v = node[1]
        return lambda x: np.full(np.shape(x), v) if np.ndim(x) else v
    if kind == "x":
        return lambda x: x
    if kind == "neg":
        f = _compile(node[1])
        return lambda x: -f(x)
    if kind == "call":
        fn = FUNCTIONS[node[1]]
        f = _compile(node[2])
        return lambda x: fn(f(x))
    op = _BINOPS[node[1]]
    f, g = _compile(node[2]), _compile(node[3])
    if node[1] == "^" and node[3][0] == "num" and float(node[3][1]).is_integer():
        # integer powers stay defined for negative bases
        k = int(node[3][1])
        return lambda x: np.power(f(x), k) if k >= 0 else 1.0 / np.power(f(x), -k)
    return lambda x: op(f(x), g(x))


def _is_const(node) -> bool:
    if node[0] == "num":
        return True
    if node[0] == "x":
        return False
    if node[0] in ("neg",):
        return _is_const(node[1])
    if node[0] == "call":
        return _is_const(node[2])
    return _is_const(node[2]) and _is_const(node[3])


def _show(node) -> str:
    kind = node[0]
    if kind == "num":
        return repr(float(node[1]))
    if kind == "x":
        return "x"
    if kind == "neg":
        return f"(-{_show(node[1])})"
    if kind == "call":
        return f"{node[1]}({_show(node[2])})"
    return f"({_show(node[2])}{node[1]}{_show(node[3])})"


class ScalarField:
    """A parsed scalar coefficient ``x -> value``.

    Calling with a real array checks the result for non-finite values and
    raises :class:`EvaluationDomainError` naming the first bad ``x``.
    Complex input skips that check.
    """

    def __init__(self, text: str, node=None):
        self.text = text
        self._node = node if node is not None else _Parser(text).parse()
        self._fn = _compile(self._node)
        self.is_constant = _is_const(self._node)

    def __call__(self, x):
        xa = np.asarray(x)
        if np.iscomplexobj(xa):
            return np.asarray(self._fn(xa), dtype=complex)
        xa = xa.astype(float)
        with np.errstate(all="ignore"):
            val = np.asarray(self._fn(xa), dtype=float)
        if val.shape != xa.shape:
            val = np.broadcast_to(val, xa.shape).copy()
        bad = ~np.isfinite(val) & np.isfinite(xa)
        if np.any(bad):
            raise EvaluationDomainError(self.text, float(xa[bad].flat[0]))
        return val

    def derivative(self, x, h: float = 1e-30):
        """Complex-step derivative; exact to rounding for the supported functions."""
        xa = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.imag(np.asarray(self._fn(xa + 1j * h), dtype=complex)) / h

    def pretty(self) -> str:
        """Fully parenthesised canonical text that parses back to the same function."""
        return _show(self._node)

    def __repr__(self):
        return f"ScalarField({self.text!r})"


def parse_coefficient(expr_text: str) -> ScalarField:
    if not isinstance(expr_text, str):
        expr_text = repr(float(expr_text))
    return ScalarField(expr_text)
