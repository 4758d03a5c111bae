"""Small expression language for coefficient functions a_m(x).

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NUMBER 'j' | 'x' | 'pi' | 'e' | 'j'
            | FUNC '(' expr ')' | '(' expr ')'

Evaluation is vectorised over numpy arrays of complex ``x``. Trees can be
differentiated symbolically and serialised back to text that re-parses to
an identical tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UnsupportedCoefficientError

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e, "j": 1j}

_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}


class Node:
    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True)
class Num(Node):
    value: complex

    def evaluate(self, x):
        return self.value


@dataclass(frozen=True)
class Const(Node):
    name: str

    @property
    def value(self):
        return complex(CONSTANTS[self.name])

    def evaluate(self, x):
        return self.value


@dataclass(frozen=True)
class Var(Node):
    def evaluate(self, x):
        return x


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, x):
        return -self.arg.evaluate(x)


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, x):
        a = self.left.evaluate(x)
        if self.op == "^":
            n = _integer_exponent(self.right)
            if n is not None:
                return _ipow(a, n)
            # + 0j turns a signed-zero imaginary part into +0 (principal branch)
            return np.power(np.asarray(a, dtype=complex) + 0j, self.right.evaluate(x))
        b = self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return np.divide(np.asarray(a, dtype=complex), b)


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def evaluate(self, x):
        # + 0j: -x at real x carries -0j, which would put sqrt/log on the wrong branch
        a = np.asarray(self.arg.evaluate(x), dtype=complex) + 0j
        if self.func == "abs":
            return np.abs(a).astype(complex)
        return _NUMPY_FUNCS[self.func](a)


def _integer_exponent(node):
    if isinstance(node, Neg):
        n = _integer_exponent(node.arg)
        return None if n is None else -n
    if isinstance(node, Num):
        v = node.value
        if v.imag == 0 and float(v.real).is_integer() and abs(v.real) <= 64:
            return int(v.real)
    return None


def _ipow(a, n):
    # exact repeated squaring; keeps x^4 real for real x
    a = np.asarray(a, dtype=complex)
    if n < 0:
        return np.divide(1.0 + 0j, _ipow(a, -n))
    result = np.ones_like(a)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


# -- constructors with light constant folding --------------------------------

def _as_node(v):
    if isinstance(v, Node):
        return v
    return Num(complex(v))


def _const_value(node):
    if isinstance(node, Num):
        return node.value
    return None


def add(a, b):
    a, b = _as_node(a), _as_node(b)
    va, vb = _const_value(a), _const_value(b)
    if va == 0:
        return b
    if vb == 0:
        return a
    if va is not None and vb is not None:
        return Num(va + vb)
    return BinOp("+", a, b)


def sub(a, b):
    a, b = _as_node(a), _as_node(b)
    va, vb = _const_value(a), _const_value(b)
    if vb == 0:
        return a
    if va == 0:
        return neg(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    return BinOp("-", a, b)


def mul(a, b):
    a, b = _as_node(a), _as_node(b)
    va, vb = _const_value(a), _const_value(b)
    if va == 0 or vb == 0:
        return Num(0j)
    if va == 1:
        return b
    if vb == 1:
        return a
    if va is not None and vb is not None:
        return Num(va * vb)
    return BinOp("*", a, b)


def div(a, b):
    a, b = _as_node(a), _as_node(b)
    va, vb = _const_value(a), _const_value(b)
    if va == 0 and vb != 0:
        return Num(0j)
    if vb == 1:
        return a
    return BinOp("/", a, b)


def neg(a):
    a = _as_node(a)
    va = _const_value(a)
    if va is not None:
        return Num(-va)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, b):
    a, b = _as_node(a), _as_node(b)
    vb = _const_value(b)
    if vb == 0:
        return Num(1 + 0j)
    if vb == 1:
        return a
    return BinOp("^", a, b)


def call(name, a):
    return Call(name, _as_node(a))


# -- symbolic differentiation -------------------------------------------------

def diff(node):
    """d/dx of an expression tree."""
    if isinstance(node, (Num, Const)):
        return Num(0j)
    if isinstance(node, Var):
        return Num(1 + 0j)
    if isinstance(node, Neg):
        return neg(diff(node.arg))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = diff(u), diff(v)
        if node.op == "+":
            return add(du, dv)
        if node.op == "-":
            return sub(du, dv)
        if node.op == "*":
            return add(mul(du, v), mul(u, dv))
        if node.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), power(v, Num(2 + 0j)))
        if node.op == "^":
            if _const_value(dv) == 0:
                # u^c -> c u^(c-1) u'
                return mul(mul(v, power(u, sub(v, Num(1 + 0j)))), du)
            if _const_value(du) == 0:
                return mul(mul(node, call("log", u)), dv)
            return mul(node, add(mul(dv, call("log", u)), div(mul(v, du), u)))
    if isinstance(node, Call):
        u = node.arg
        du = diff(u)
        if _const_value(du) == 0:
            return Num(0j)
        f = node.func
        if f == "sin":
            inner = call("cos", u)
        elif f == "cos":
            inner = neg(call("sin", u))
        elif f == "tan":
            inner = div(Num(1 + 0j), power(call("cos", u), Num(2 + 0j)))
        elif f == "sinh":
            inner = call("cosh", u)
        elif f == "cosh":
            inner = call("sinh", u)
        elif f == "exp":
            inner = node
        elif f == "log":
            return div(du, u)
        elif f == "sqrt":
            return div(du, mul(Num(2 + 0j), node))
        elif f == "abs":
            # sign(u) u' for real arguments
            inner = div(u, node)
        else:
            raise UnsupportedCoefficientError(f"cannot differentiate function {f!r}")
        return mul(inner, du)
    raise UnsupportedCoefficientError(f"cannot differentiate node {node!r}")


# -- serialisation ------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt_real(v):
    if v == math.inf or v == -math.inf or v != v:
        raise ValueError("non-finite literal")
    return repr(float(v))


def _num_text(value):
    re_, im = value.real, value.imag
    if im == 0:
        s = _fmt_real(abs(re_))
        if re_ < 0 or (re_ == 0 and math.copysign(1.0, re_) < 0):
            return "(-" + s + ")"
        return s
    ims = _fmt_real(abs(im)) + "j"
    if re_ == 0:
        return ("(-" + ims + ")") if im < 0 else ims
    sign = "-" if im < 0 else "+"
    return "(" + _fmt_real(re_) + sign + ims + ")"


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def to_text(node):
    """Serialise a tree; ``parse(to_text(t)) == t`` holds for parsed trees."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        s = to_text(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            s = "(" + s + ")"
        return "-" + s
    p = _PREC[node.op]
    ls, rs = to_text(node.left), to_text(node.right)
    if node.op == "^":
        # right associative; a negated base needs parentheses
        if _prec(node.left) <= p:
            ls = "(" + ls + ")"
        if _prec(node.right) < _PREC["neg"]:
            rs = "(" + rs + ")"
    else:
        if _prec(node.left) < p:
            ls = "(" + ls + ")"
        if _prec(node.right) <= p:
            rs = "(" + rs + ")"
    return f"{ls}{node.op}{rs}"


# -- tokenizer and parser -----------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?:j(?![A-Za-z0-9_]))?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", col=pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    out.append(_Tok("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.take()
        if t.text != text:
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", col=t.col)
        return t

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", col=t.col)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        t = self.peek()
        if t.text == "-":
            self.take()
            return Neg(self.unary())
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            if t.text.endswith("j"):
                return Num(complex(0.0, float(t.text[:-1])))
            return Num(complex(float(t.text), 0.0))
        if t.kind == "name":
            if t.text == "x":
                return Var()
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            raise ParseError(f"unknown name {t.text!r}", col=t.col)
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", col=t.col)


def parse(text):
    """Parse an expression string into a tree. Raises ParseError with column."""
    return _Parser(text).parse()


def evaluate(node, x):
    """Evaluate a tree at scalar or array ``x``; result has the shape of ``x``."""
    x = np.asarray(x, dtype=complex)
    with np.errstate(all="ignore"):
        out = node.evaluate(x)
    return np.broadcast_to(np.asarray(out, dtype=complex), x.shape).copy()
