"""Factorable decomposition and linear convexification.

Every nonlinear subterm of the objective and constraints is replaced by an
auxiliary column defined by an :class:`Atom` (``w = x*y``, ``w = x**2``,
``w = exp(x)``, ...).  Each atom contributes linear under- and
over-estimators valid on the box of its inputs; auxiliary bounds come from
interval evaluation.  The objective is represented by a final column
``eta`` with the row ``f_linearized - eta <= 0``.

Columns ``0..n-1`` of the relaxation are the original variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import Expr, Interval
from .lp import LpProblem
from .model import Problem

BILINEAR = "bilinear"
SQUARE = "square"
POWER = "power"
EXP = "exp"
LOG = "log"
SQRT = "sqrt"
QUOTIENT = "quotient"
LINEAR = "linear"

Row = tuple[dict[int, float], str, float]


class RelaxationError(ValueError):
    """The problem cannot be convexified (e.g. a denominator box contains 0)."""


@dataclass(frozen=True)
class Atom:
    """``output = kind(inputs)``.

    ``linear`` atoms carry ``coefs``/``constant``: ``w = sum coefs[i]*x_i + c``.
    ``quotient`` atoms define ``w = num / x_den`` with ``num`` the affine form
    in ``coefs``/``constant`` and ``inputs == (den,)``; they are relaxed
    through the bilinear identity ``w * x_den = num``.
    """

    output: int
    kind: str
    inputs: tuple[int, ...]
    exponent: int = 0
    coefs: tuple[tuple[int, float], ...] = ()
    constant: float = 0.0

    def expression(self) -> Expr:
        """The atom's right-hand side as an expression over relaxation columns."""
        xs = [ex.var(i) for i in self.inputs]
        if self.kind == BILINEAR:
            return xs[0] * xs[1]
        if self.kind == SQUARE:
            return ex.power(xs[0], 2)
        if self.kind == POWER:
            return ex.power(xs[0], self.exponent)
        if self.kind == EXP:
            return ex.exp(xs[0])
        if self.kind == LOG:
            return ex.log(xs[0])
        if self.kind == SQRT:
            return ex.sqrt(xs[0])
        num = ex.linear(dict(self.coefs), self.constant)
        if self.kind == QUOTIENT:
            return num / xs[0]
        return num

    def evaluate(self, values) -> float:
        return ex.evaluate(self.expression(), values)


@dataclass
class Decomposition:
    n: int
    atoms: list[Atom]
    box: list[Interval]
    objective: tuple[dict[int, float], float]
    constraints: list[tuple[dict[int, float], float]]

    @property
    def ncols(self) -> int:
        return len(self.box)


class _Decomposer:
    def __init__(self, pr: Problem):
        self.n = pr.n
        self.box = pr.box()
        self.atoms: list[Atom] = []
        self.memo: dict[tuple, int] = {}

    def add_atom(self, kind, inputs, exponent=0, coefs=(), constant=0.0) -> int:
        key = (kind, tuple(inputs), exponent, tuple(coefs), constant)
        if key in self.memo:
            return self.memo[key]
        idx = len(self.box)
        atom = Atom(idx, kind, tuple(inputs), exponent, tuple(coefs), constant)
        if kind == QUOTIENT and self.box[inputs[0]].contains_zero():
            raise RelaxationError(f"denominator column {inputs[0]} has a box containing 0")
        if kind == LOG and not self.box[inputs[0]].lo > 0.0:
            raise RelaxationError(f"log argument column {inputs[0]} has a box reaching <= 0")
        if kind == SQRT and self.box[inputs[0]].lo < 0.0:
            raise RelaxationError(f"sqrt argument column {inputs[0]} has a box reaching < 0")
        try:
            bounds = ex.interval(atom.expression(), self.box)
        except (ex.ExpressionError, ex.DomainError) as err:
            raise RelaxationError(str(err)) from err
        self.box.append(bounds)
        self.atoms.append(atom)
        self.memo[key] = idx
        return idx

    def column(self, form) -> int:
        coefs, c = form
        if c == 0.0 and len(coefs) == 1:
            (i, a), = coefs.items()
            if a == 1.0:
                return i
        return self.add_atom(LINEAR, (), coefs=tuple(sorted(coefs.items())), constant=c)

    def affine(self, e: Expr) -> tuple[dict[int, float], float]:
        op = e.op
        if op == ex.CONST:
            return {}, e.value
        if op == ex.VAR:
            return {e.index: 1.0}, 0.0
        if op in (ex.SUM, ex.DIFFERENCE):
            forms = [self.affine(c) for c in e.children]
            if op == ex.DIFFERENCE:
                forms[1] = _scale(forms[1], -1.0)
            return _add(forms)
        if op == ex.PRODUCT:
            scalar = 1.0
            varying = []
            for c in e.children:
                f = self.affine(c)
                if f[0]:
                    varying.append(f)
                else:
                    scalar *= f[1]
            if not varying or scalar == 0.0:
                return {}, scalar if not varying else 0.0
            if len(varying) == 1:
                return _scale(varying[0], scalar)
            cur = self.column(varying[0])
            for f in varying[1:]:
                nxt = self.column(f)
                if nxt == cur:
                    cur = self.add_atom(SQUARE, (cur,))
                else:
                    cur = self.add_atom(BILINEAR, (cur, nxt))
            return {cur: scalar}, 0.0
        if op == ex.QUOTIENT:
            num = self.affine(e.children[0])
            den = self.affine(e.children[1])
            if not den[0]:
                if den[1] == 0.0:
                    raise RelaxationError("division by the constant 0")
                return _scale(num, 1.0 / den[1])
            return {self._quotient(num, self.column(den)): 1.0}, 0.0
        if op == ex.POWER:
            base = self.affine(e.children[0])
            k = e.exponent
            if not base[0]:
                return {}, _const_eval(e)
            if k == 0:
                return {}, 1.0
            if k == 1:
                return base
            col = self.column(base)
            pos = self.add_atom(SQUARE, (col,)) if abs(k) == 2 else self.add_atom(POWER, (col,), abs(k))
            if k > 0:
                return {pos: 1.0}, 0.0
            return {self._quotient(({}, 1.0), pos): 1.0}, 0.0
        arg = self.affine(e.children[0])
        if not arg[0]:
            return {}, _const_eval(e)
        kind = {ex.EXP: EXP, ex.LOG: LOG, ex.SQRT: SQRT}[op]
        return {self.add_atom(kind, (self.column(arg),)): 1.0}, 0.0

    def _quotient(self, num, den_col) -> int:
        return self.add_atom(QUOTIENT, (den_col,), coefs=tuple(sorted(num[0].items())),
                             constant=num[1])


def _const_eval(e: Expr) -> float:
    try:
        return ex.evaluate(e, [])
    except ex.DomainError as err:
        raise RelaxationError(f"constant subexpression {ex.to_string(e)}: {err}") from err


def _scale(form, s):
    coefs, c = form
    return {i: a * s for i, a in coefs.items()}, c * s


def _add(forms):
    coefs: dict[int, float] = {}
    c = 0.0
    for f, k in forms:
        for i, a in f.items():
            coefs[i] = coefs.get(i, 0.0) + a
        c += k
    return {i: a for i, a in coefs.items() if a != 0.0}, c


def decompose(pr: Problem) -> Decomposition:
    """Lift every nonlinear subterm of ``pr`` into auxiliary columns."""
    d = _Decomposer(pr)
    objective = d.affine(pr.objective)
    constraints = [d.affine(g) for g in pr.constraints]
    return Decomposition(pr.n, d.atoms, d.box, objective, constraints)


# -- envelopes --------------------------------------------------------------

def _line_rows(w, x, slope, intercept, rel) -> Row:
    # w (rel) slope*x + intercept
    return ({w: 1.0, x: -slope} if slope != 0.0 else {w: 1.0}, rel, intercept + 0.0)


def _tangent(h, dh, p):
    s = dh(p)
    return s, h(p) - s * p


def _secant(h, lo, hi):
    s = (h(hi) - h(lo)) / (hi - lo)
    return s, h(lo) - s * lo


def _convex_rows(w, x, h, dh, lo, hi, points) -> list[Row]:
    rows = [_line_rows(w, x, *_secant(h, lo, hi), "<=")]
    rows += [_line_rows(w, x, *_tangent(h, dh, p), ">=") for p in points]
    return rows


def _concave_rows(w, x, h, dh, lo, hi, points) -> list[Row]:
    rows = [_line_rows(w, x, *_secant(h, lo, hi), ">=")]
    rows += [_line_rows(w, x, *_tangent(h, dh, p), "<=") for p in points]
    return rows


def _power_rows(w, x, k, lo, hi) -> list[Row]:
    def h(t):
        return t ** k

    def dh(t):
        return k * t ** (k - 1)

    pts = [lo, 0.5 * (lo + hi), hi]
    if k % 2 == 0 or lo >= 0.0:
        return _convex_rows(w, x, h, dh, lo, hi, pts)
    if hi <= 0.0:
        return _concave_rows(w, x, h, dh, lo, hi, pts)

    # odd power across 0: shift every candidate line until it is valid
    def stationary(slope):
        if slope < 0.0:
            return []
        r = (slope / k) ** (1.0 / (k - 1))
        return [t for t in (-r, r) if lo < t < hi]

    rows = []
    for slope, icpt in [_tangent(h, dh, p) for p in pts] + [_secant(h, lo, hi)]:
        cands = [lo, hi] + stationary(slope)
        gaps = [h(t) - (slope * t + icpt) for t in cands]
        rows.append(_line_rows(w, x, slope, icpt + min(min(gaps), 0.0), ">="))
        rows.append(_line_rows(w, x, slope, icpt + max(max(gaps), 0.0), "<="))
    return rows


def _mccormick(w, x, y, bx: Interval, by: Interval) -> list[Row]:
    """Rows for ``w = x*y``; ``w`` may be an affine form ``(coefs, const)``."""
    xl, xu, yl, yu = bx.lo, bx.hi, by.lo, by.hi
    if isinstance(w, int):
        wc, w0 = {w: 1.0}, 0.0
    else:
        wc, w0 = w

    def row(ax, ay, c, rel):
        # w (rel) ax*x + ay*y + c
        coefs = dict(wc)
        for col, a in ((x, ax), (y, ay)):
            if a != 0.0:
                coefs[col] = coefs.get(col, 0.0) - a
        return ({k: v for k, v in coefs.items() if v != 0.0}, rel, c - w0 + 0.0)

    return [
        row(yl, xl, -xl * yl, ">="),
        row(yu, xu, -xu * yu, ">="),
        row(yl, xu, -xu * yl, "<="),
        row(yu, xl, -xl * yu, "<="),
    ]


def envelope(atom: Atom, box: list[Interval]) -> list[Row]:
    """Linear rows containing the graph of ``atom`` over ``box``.

    ``box`` is indexed by relaxation column and must be finite on the atom's
    inputs (and on the output, for quotients).
    """
    w = atom.output
    if atom.kind == LINEAR:
        coefs = {w: 1.0}
        for i, a in atom.coefs:
            coefs[i] = coefs.get(i, 0.0) - a
        return [(coefs, "=", atom.constant)]
    for i in atom.inputs:
        if not (math.isfinite(box[i].lo) and math.isfinite(box[i].hi)):
            raise RelaxationError(f"column {i} feeds a nonlinear atom but is unbounded")
    if atom.kind == BILINEAR:
        x, y = atom.inputs
        return _mccormick(w, x, y, box[x], box[y])
    if atom.kind == QUOTIENT:
        (y,) = atom.inputs
        if box[y].contains_zero():
            raise RelaxationError(f"denominator column {y} has a box containing 0")
        if not (math.isfinite(box[w].lo) and math.isfinite(box[w].hi)):
            raise RelaxationError(f"quotient column {w} is unbounded")
        # w*y = num  <=>  num is the product w*y
        return _mccormick((dict(atom.coefs), atom.constant), w, y, box[w], box[y])

    (x,) = atom.inputs
    lo, hi = box[x].lo, box[x].hi
    if atom.kind == LOG and not lo > 0.0:
        raise RelaxationError(f"log argument column {x} has a box reaching <= 0")
    if atom.kind == SQRT and lo < 0.0:
        raise RelaxationError(f"sqrt argument column {x} has a box reaching < 0")
    if lo == hi:
        return [({w: 1.0}, "=", atom.evaluate(_point_at(x, lo)))]
    mid = 0.5 * (lo + hi)
    if atom.kind == SQUARE:
        return _convex_rows(w, x, lambda t: t * t, lambda t: 2.0 * t, lo, hi, [hi, lo, mid])
    if atom.kind == POWER:
        return _power_rows(w, x, atom.exponent, lo, hi)
    if atom.kind == EXP:
        return _convex_rows(w, x, math.exp, math.exp, lo, hi, [lo, mid, hi])
    if atom.kind == LOG:
        return _concave_rows(w, x, math.log, lambda t: 1.0 / t, lo, hi, [lo, mid, hi])
    if atom.kind == SQRT:
        # the tangent at 0 is vertical; x >= 0 already covers it
        pts = [p for p in (lo, mid, hi) if p > 0.0]
        return _concave_rows(w, x, math.sqrt, lambda t: 0.5 / math.sqrt(t), lo, hi, pts)
    raise RelaxationError(f"unknown atom kind {atom.kind!r}")


def _point_at(i, v):
    p = np.zeros(i + 1)
    p[i] = v
    return p


# -- assembled relaxation ---------------------------------------------------

@dataclass
class LinearRelaxation:
    """Polyhedral outer approximation of a problem's feasible set.

    Columns: ``n`` originals, then auxiliaries, then ``eta`` (the objective
    stand-in, last).  Minimizing ``eta`` over the rows bounds the problem's
    optimum from below.
    """

    n: int
    lb: np.ndarray
    ub: np.ndarray
    rows: list[Row]
    eta: int
    atoms: list[Atom]
    integers: tuple[int, ...]
    names: list[str] = field(default_factory=list)
    objective_form: tuple[dict[int, float], float] = ({}, 0.0)

    @property
    def ncols(self) -> int:
        return self.lb.size

    def to_lp(self, extra_rows=()) -> LpProblem:
        c = np.zeros(self.ncols)
        c[self.eta] = 1.0
        return LpProblem(c, self.lb.copy(), self.ub.copy(), list(self.rows) + list(extra_rows))

    def lift(self, point) -> np.ndarray:
        """Extend an original point with the exact auxiliary values and ``eta = f``."""
        full = np.zeros(self.ncols)
        full[: self.n] = point
        for atom in self.atoms:
            full[atom.output] = atom.evaluate(full)
        full[self.eta] = self._objective_value(full)
        return full

    def _objective_value(self, full) -> float:
        coefs, c = self.objective_form
        return c + sum(a * full[i] for i, a in coefs.items())

    def dump(self) -> str:
        """Tabular text listing columns, bounds and rows."""
        lines = [f"columns {self.ncols}  originals {self.n}  atoms {len(self.atoms)}  "
                 f"rows {len(self.rows)}  objective column {self.names[self.eta]}"]
        lines.append("")
        lines.append(f"{'col':>5} {'name':<12} {'lower':>14} {'upper':>14}  definition")
        defs = {a.output: a for a in self.atoms}
        for j in range(self.ncols):
            d = ""
            if j in defs:
                expr_s = ex.to_string(defs[j].expression())
                d = f"{defs[j].kind}: {expr_s}"
            elif j == self.eta:
                d = "objective"
            elif j in self.integers:
                d = "integer"
            lines.append(f"{j:>5} {self.names[j]:<12} {self.lb[j]:>14.6g} {self.ub[j]:>14.6g}  {d}")
        lines.append("")
        for r, (coefs, rel, rhs) in enumerate(self.rows):
            terms = " ".join(f"{a:+.6g}*{self.names[j]}" for j, a in sorted(coefs.items()))
            lines.append(f"r{r:<4} {terms or '0'} {rel} {rhs:.6g}")
        return "\n".join(lines) + "\n"


def build(pr: Problem) -> LinearRelaxation:
    d = decompose(pr)
    rows: list[Row] = []
    for atom in d.atoms:
        rows.extend(envelope(atom, d.box))
    for coefs, c in d.constraints:
        if coefs:
            rows.append((dict(coefs), "<=", -c + 0.0))
        elif c > 0.0:
            rows.append(({}, "<=", -c))  # constant violated constraint: infeasible row
    eta = d.ncols
    try:
        f_range = ex.interval(pr.objective, pr.box())
    except ex.ExpressionError:
        f_range = Interval(-math.inf, math.inf)
    ocoefs, oc = d.objective
    orow = dict(ocoefs)
    orow[eta] = -1.0
    rows.append((orow, "<=", -oc + 0.0))

    lb = np.array([b.lo for b in d.box] + [f_range.lo])
    ub = np.array([b.hi for b in d.box] + [f_range.hi])
    names = pr.names() + [f"w{a.output - pr.n}" for a in d.atoms] + ["eta"]
    return LinearRelaxation(pr.n, lb, ub, rows, eta, d.atoms, pr.integer_indices, names,
                            d.objective)
