"""Expression trees for factorable functions.

Expressions are immutable trees over the operator set
``+ - * / ^ exp log sqrt`` with integer exponents only.  They can be
parsed from (and printed to) a prefix s-expression syntax::

    (+ (* x0 x1) (^ x2 2) -1.5)

Atoms are decimal literals or variable tokens ``x<k>``.  ``+`` and ``*``
are n-ary, ``-`` takes two operands (one operand means negation),
``/`` and ``^`` take two, ``exp``/``log``/``sqrt`` take one.  The exponent
of ``^`` must be an integer literal.

Evaluation, reverse-mode gradients and interval enclosures are provided.
Domain failures (log of a non-positive number, division by zero, ...)
raise :class:`DomainError` so callers can treat them as an infinite
objective instead of crashing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

CONST = "const"
VAR = "var"
SUM = "+"
PRODUCT = "*"
DIFFERENCE = "-"
QUOTIENT = "/"
POWER = "^"
EXP = "exp"
LOG = "log"
SQRT = "sqrt"

UNARY_OPS = (EXP, LOG, SQRT)
OPERATORS = (SUM, PRODUCT, DIFFERENCE, QUOTIENT, POWER) + UNARY_OPS


class ExpressionError(ValueError):
    """Malformed expression or unsupported operator."""


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DomainError(ArithmeticError):
    """Evaluation left the domain of an operator (or the point is
    non-differentiable)."""


@dataclass(frozen=True)
class Expr:
    """Immutable expression node.

    ``value`` holds the constant for ``const`` nodes, the variable index for
    ``var`` nodes and the integer exponent for ``^`` nodes (whose only child
    is the base).
    """

    op: str
    children: tuple[Expr, ...] = ()
    value: float = 0.0
    _tape: object = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.op not in OPERATORS and self.op not in (CONST, VAR):
            raise ExpressionError(f"unknown operator {self.op!r}")
        if self.op == VAR and (int(self.value) != self.value or self.value < 0):
            raise ExpressionError(f"bad variable index {self.value!r}")
        if self.op == POWER and int(self.value) != self.value:
            raise ExpressionError("only integer exponents are supported")

    # -- construction sugar -------------------------------------------------
    def __add__(self, other):
        return Expr(SUM, (self, as_expr(other)))

    def __radd__(self, other):
        return Expr(SUM, (as_expr(other), self))

    def __sub__(self, other):
        return Expr(DIFFERENCE, (self, as_expr(other)))

    def __rsub__(self, other):
        return Expr(DIFFERENCE, (as_expr(other), self))

    def __mul__(self, other):
        return Expr(PRODUCT, (self, as_expr(other)))

    def __rmul__(self, other):
        return Expr(PRODUCT, (as_expr(other), self))

    def __truediv__(self, other):
        return Expr(QUOTIENT, (self, as_expr(other)))

    def __rtruediv__(self, other):
        return Expr(QUOTIENT, (as_expr(other), self))

    def __neg__(self):
        return Expr(DIFFERENCE, (const(0.0), self))

    def __pow__(self, k):
        return power(self, k)

    def __str__(self):
        return to_string(self)

    @property
    def index(self) -> int:
        return int(self.value)

    @property
    def exponent(self) -> int:
        return int(self.value)

    def walk(self) -> Iterator[Expr]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def const(c: float) -> Expr:
    return Expr(CONST, (), float(c))


def var(i: int) -> Expr:
    return Expr(VAR, (), int(i))


def power(base: Expr, k: int) -> Expr:
    if int(k) != k:
        raise ExpressionError("only integer exponents are supported")
    return Expr(POWER, (as_expr(base),), int(k))


def exp(a) -> Expr:
    return Expr(EXP, (as_expr(a),))


def log(a) -> Expr:
    return Expr(LOG, (as_expr(a),))


def sqrt(a) -> Expr:
    return Expr(SQRT, (as_expr(a),))


def add(*terms) -> Expr:
    return Expr(SUM, tuple(as_expr(t) for t in terms))


def mul(*factors) -> Expr:
    return Expr(PRODUCT, tuple(as_expr(t) for t in factors))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def linear(coefs: dict[int, float], constant: float = 0.0) -> Expr:
    """Build ``sum_i coefs[i] * x_i + constant`` in index order."""
    terms = [Expr(PRODUCT, (const(c), var(i))) for i, c in sorted(coefs.items()) if c != 0.0]
    if constant != 0.0 or not terms:
        terms.append(const(constant))
    if len(terms) == 1:
        return terms[0]
    return Expr(SUM, tuple(terms))


def variables(e: Expr) -> set[int]:
    return {node.index for node in e.walk() if node.op == VAR}


def is_constant(e: Expr) -> bool:
    return all(node.op != VAR for node in e.walk())


def nonlinear_variables(e: Expr) -> set[int]:
    """Indices of variables that appear inside a nonlinear operation."""
    out: set[int] = set()

    def visit(node: Expr, nonlinear: bool):
        if node.op == VAR:
            if nonlinear:
                out.add(node.index)
            return
        if node.op == CONST:
            return
        if node.op in (SUM, DIFFERENCE):
            for c in node.children:
                visit(c, nonlinear)
        elif node.op == PRODUCT:
            varying = sum(not is_constant(c) for c in node.children)
            for c in node.children:
                visit(c, nonlinear or varying > 1)
        elif node.op == QUOTIENT:
            num, den = node.children
            den_varies = not is_constant(den)
            visit(num, nonlinear or den_varies)
            visit(den, nonlinear or den_varies)
        elif node.op == POWER:
            visit(node.children[0], nonlinear or node.exponent not in (0, 1))
        else:
            visit(node.children[0], True)

    visit(e, False)
    return out


# -- printing / parsing -----------------------------------------------------

def _format_number(v: float) -> str:
    if v == 0.0:
        return "0.0"  # drops the sign of -0.0, which never matters here
    return repr(float(v))


def to_string(e: Expr) -> str:
    if e.op == CONST:
        return _format_number(e.value)
    if e.op == VAR:
        return f"x{e.index}"
    if e.op == POWER:
        return f"(^ {to_string(e.children[0])} {e.exponent})"
    return "(" + " ".join([e.op] + [to_string(c) for c in e.children]) + ")"


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_INTEGER = re.compile(r"[+-]?\d+\Z")
_ARITY = {SUM: (1, None), PRODUCT: (1, None), DIFFERENCE: (1, 2), QUOTIENT: (2, 2),
          POWER: (2, 2), EXP: (1, 1), LOG: (1, 1), SQRT: (1, 1)}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", pos)
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), start))
        pos = m.end()
    return tokens


def parse(text: str) -> Expr:
    """Parse a prefix s-expression."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 0)
    expr, pos = _parse_at(tokens, 0, text)
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    return expr


def _parse_atom(tok: str, at: int) -> Expr:
    if tok[0] == "x":
        digits = tok[1:]
        if not digits.isdigit() or not digits.isascii():
            raise ParseError(f"malformed variable token {tok!r}", at)
        return var(int(digits))
    if _NUMBER.match(tok):
        return const(float(tok))
    raise ParseError(f"unexpected token {tok!r}", at)


def _parse_at(tokens, i, text) -> tuple[Expr, int]:
    tok, at = tokens[i]
    if tok == ")":
        raise ParseError("unexpected ')'", at)
    if tok != "(":
        return _parse_atom(tok, at), i + 1
    if i + 1 >= len(tokens):
        raise ParseError("unterminated expression", len(text))
    op, op_at = tokens[i + 1]
    if op not in _ARITY:
        raise ParseError(f"unknown operator {op!r}", op_at)
    i += 2
    args = []
    arg_pos = []
    while True:
        if i >= len(tokens):
            raise ParseError("unterminated expression", len(text))
        if tokens[i][0] == ")":
            i += 1
            break
        arg_pos.append(tokens[i][1])
        if op == POWER and len(args) == 1:
            ktok, kat = tokens[i]
            if not _INTEGER.match(ktok):
                raise ParseError(f"exponent must be an integer literal, got {ktok!r}", kat)
            args.append(int(ktok))
            i += 1
            continue
        arg, i = _parse_at(tokens, i, text)
        args.append(arg)
    lo, hi = _ARITY[op]
    if len(args) < lo or (hi is not None and len(args) > hi):
        raise ParseError(f"wrong number of operands for {op!r}", op_at)
    if op == POWER:
        return power(args[0], args[1]), i
    if op == DIFFERENCE and len(args) == 1:
        return Expr(DIFFERENCE, (const(0.0), args[0])), i
    return Expr(op, tuple(args)), i


# -- compiled tape ----------------------------------------------------------

class _Tape:
    """Post-order node list with child slots, shared by evaluate/gradient."""

    __slots__ = ("ops", "args", "values", "nvars")

    def __init__(self, root: Expr):
        ops, args, values = [], [], []
        slot: dict[int, int] = {}
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in slot:
                continue
            if not expanded and node.children:
                stack.append((node, True))
                for c in reversed(node.children):
                    stack.append((c, False))
                continue
            slot[id(node)] = len(ops)
            ops.append(node.op)
            args.append(tuple(slot[id(c)] for c in node.children))
            values.append(node.value)
        self.ops = ops
        self.args = args
        self.values = values
        self.nvars = max((int(v) + 1 for o, v in zip(ops, values) if o == VAR), default=0)

    def forward(self, x) -> list[float]:
        out = [0.0] * len(self.ops)
        for k, op in enumerate(self.ops):
            a = self.args[k]
            if op == CONST:
                out[k] = self.values[k]
            elif op == VAR:
                out[k] = float(x[int(self.values[k])])
            elif op == SUM:
                s = 0.0
                for j in a:
                    s += out[j]
                out[k] = s
            elif op == PRODUCT:
                p = 1.0
                for j in a:
                    p *= out[j]
                out[k] = p
            elif op == DIFFERENCE:
                out[k] = out[a[0]] - out[a[1]]
            elif op == QUOTIENT:
                d = out[a[1]]
                if d == 0.0:
                    raise DomainError("division by zero")
                out[k] = out[a[0]] / d
            elif op == POWER:
                b = out[a[0]]
                n = int(self.values[k])
                if n < 0 and b == 0.0:
                    raise DomainError("negative power of zero")
                try:
                    out[k] = b ** n
                except OverflowError as exc:
                    raise DomainError("overflow in power") from exc
            elif op == EXP:
                try:
                    out[k] = math.exp(out[a[0]])
                except OverflowError as exc:
                    raise DomainError("overflow in exp") from exc
            elif op == LOG:
                v = out[a[0]]
                if not v > 0.0:
                    raise DomainError(f"log of non-positive value {v!r}")
                out[k] = math.log(v)
            else:
                v = out[a[0]]
                if not v >= 0.0:
                    raise DomainError(f"sqrt of negative value {v!r}")
                out[k] = math.sqrt(v)
            if out[k] != out[k] or math.isinf(out[k]):
                raise DomainError(f"non-finite value in {op!r}")
        return out

    def backward(self, vals: list[float], n: int) -> np.ndarray:
        adj = [0.0] * len(self.ops)
        adj[-1] = 1.0
        grad = np.zeros(n)
        for k in range(len(self.ops) - 1, -1, -1):
            g = adj[k]
            if g == 0.0:
                continue
            op = self.ops[k]
            a = self.args[k]
            if op == VAR:
                grad[int(self.values[k])] += g
            elif op == SUM:
                for j in a:
                    adj[j] += g
            elif op == PRODUCT:
                # prefix/suffix products avoid dividing by zero factors
                m = len(a)
                pre = [1.0] * (m + 1)
                for t in range(m):
                    pre[t + 1] = pre[t] * vals[a[t]]
                suf = 1.0
                for t in range(m - 1, -1, -1):
                    adj[a[t]] += g * pre[t] * suf
                    suf *= vals[a[t]]
            elif op == DIFFERENCE:
                adj[a[0]] += g
                adj[a[1]] -= g
            elif op == QUOTIENT:
                d = vals[a[1]]
                adj[a[0]] += g / d
                adj[a[1]] -= g * vals[k] / d
            elif op == POWER:
                nexp = int(self.values[k])
                if nexp != 0:
                    adj[a[0]] += g * nexp * vals[a[0]] ** (nexp - 1)
            elif op == EXP:
                adj[a[0]] += g * vals[k]
            elif op == LOG:
                adj[a[0]] += g / vals[a[0]]
            elif op == SQRT:
                if vals[k] == 0.0:
                    raise DomainError("sqrt is not differentiable at 0")
                adj[a[0]] += g * 0.5 / vals[k]
        return grad


def _tape(e: Expr) -> _Tape:
    t = e._tape
    if t is None:
        t = _Tape(e)
        object.__setattr__(e, "_tape", t)
    return t


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at ``point``; raises :class:`DomainError`."""
    tape = _tape(e)
    if len(point) < tape.nvars:
        raise IndexError(f"point has {len(point)} entries, expression uses {tape.nvars}")
    return tape.forward(point)[-1]


def value_and_gradient(e: Expr, point: Sequence[float]) -> tuple[float, np.ndarray]:
    tape = _tape(e)
    if len(point) < tape.nvars:
        raise IndexError(f"point has {len(point)} entries, expression uses {tape.nvars}")
    vals = tape.forward(point)
    return vals[-1], tape.backward(vals, len(point))


def gradient(e: Expr, point: Sequence[float]) -> np.ndarray:
    """Exact derivative of ``e`` with respect to every entry of ``point``."""
    return value_and_gradient(e, point)[1]


# -- interval enclosures ----------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi


def _widen(lo: float, hi: float) -> Interval:
    # one ulp outward per operation keeps the enclosure sound under rounding;
    # zero results are exact (short of underflow) and stay put
    if lo != 0.0:
        lo = math.nextafter(lo, -math.inf)
    if hi != 0.0:
        hi = math.nextafter(hi, math.inf)
    return Interval(lo + 0.0, hi + 0.0)


def _mul(a: Interval, b: Interval) -> Interval:
    def p(u, v):
        if u == 0.0 or v == 0.0:
            return 0.0
        return u * v
    cands = [p(a.lo, b.lo), p(a.lo, b.hi), p(a.hi, b.lo), p(a.hi, b.hi)]
    return _widen(min(cands), max(cands))


def _safe(f, v, default):
    try:
        return f(v)
    except OverflowError:
        return default


def _ipow(a: Interval, k: int) -> Interval:
    if k == 0:
        return Interval(1.0, 1.0)
    if k < 0:
        if a.contains_zero():
            return Interval(-math.inf, math.inf)
        return _recip(_ipow(a, -k))
    lo_k = _safe(lambda v: v ** k, a.lo, math.copysign(math.inf, a.lo) if k % 2 else math.inf)
    hi_k = _safe(lambda v: v ** k, a.hi, math.copysign(math.inf, a.hi) if k % 2 else math.inf)
    if k % 2 == 1:
        return _widen(lo_k, hi_k)
    if a.lo >= 0.0:
        return _widen(lo_k, hi_k)
    if a.hi <= 0.0:
        return _widen(hi_k, lo_k)
    return _widen(0.0, max(lo_k, hi_k))


def _recip(a: Interval) -> Interval:
    if a.contains_zero():
        return Interval(-math.inf, math.inf)
    return _widen(1.0 / a.hi, 1.0 / a.lo)


def interval(e: Expr, box: Sequence[Interval]) -> Interval:
    """Sound enclosure of the range of ``e`` over ``box``.

    Variables appearing nonlinearly must have finite box entries.
    """
    for i in nonlinear_variables(e):
        b = box[i]
        if math.isinf(b.lo) or math.isinf(b.hi):
            raise ExpressionError(f"variable x{i} appears nonlinearly but has an infinite bound")
    return _interval(e, box)


def _interval(e: Expr, box) -> Interval:
    op = e.op
    if op == CONST:
        return Interval(e.value, e.value)
    if op == VAR:
        b = box[e.index]
        return Interval(float(b.lo), float(b.hi))
    ch = [_interval(c, box) for c in e.children]
    if op == SUM:
        lo = sum(c.lo for c in ch)
        hi = sum(c.hi for c in ch)
        return _widen(lo, hi)
    if op == DIFFERENCE:
        a, b = ch
        return _widen(a.lo - b.hi, a.hi - b.lo)
    if op == PRODUCT:
        acc = ch[0]
        for c in ch[1:]:
            acc = _mul(acc, c)
        return acc
    if op == QUOTIENT:
        return _mul(ch[0], _recip(ch[1]))
    if op == POWER:
        return _ipow(ch[0], e.exponent)
    a = ch[0]
    if op == EXP:
        return _widen(_safe(math.exp, a.lo, math.inf), _safe(math.exp, a.hi, math.inf))
    if op == LOG:
        if a.hi <= 0.0:
            raise DomainError("log of a non-positive interval")
        lo = math.log(a.lo) if a.lo > 0.0 else -math.inf
        return _widen(lo, math.log(a.hi) if math.isfinite(a.hi) else math.inf)
    if a.hi < 0.0:
        raise DomainError("sqrt of a negative interval")
    return _widen(math.sqrt(max(a.lo, 0.0)), math.sqrt(a.hi))
