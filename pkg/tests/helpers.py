"""Random expression trees and numeric helpers shared by the tests."""

from __future__ import annotations

import numpy as np

from lbminlp import expr as ex


def random_tree(rng: np.random.Generator, n_vars: int, depth: int) -> ex.Expr:
    """Random expression that is finite and smooth on the box [0.5, 2]^n.

    Arguments of log and sqrt, and denominators, are wrapped so they stay
    bounded away from zero; exp only sees bounded arguments.
    """
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return ex.var(int(rng.integers(n_vars)))
        return ex.const(float(np.round(rng.uniform(-2, 2), 2)))
    kind = rng.choice(["+", "*", "-", "/", "^", "exp", "log", "sqrt"])
    a = random_tree(rng, n_vars, depth - 1)
    if kind in ("+", "*"):
        k = int(rng.integers(2, 4))
        kids = [a] + [random_tree(rng, n_vars, depth - 1) for _ in range(k - 1)]
        return ex.Expr(kind, tuple(kids))
    if kind == "-":
        return a - random_tree(rng, n_vars, depth - 1)
    if kind == "/":
        return a / (1.0 + ex.power(random_tree(rng, n_vars, depth - 1), 2))
    if kind == "^":
        return ex.power(a, int(rng.integers(1, 4)))
    positive = 0.5 + ex.power(a, 2)
    if kind == "exp":
        return ex.exp(a / positive)
    if kind == "log":
        return ex.log(positive)
    return ex.sqrt(positive)


def five_point_gradient(fn, x, h=1e-3):
    """Fourth-order central differences."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)
    return g


def relative_error(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)), initial=0.0))


ENVELOPE_ATOMS = [("bilinear", 0), ("square", 0), ("exp", 0), ("log", 0), ("sqrt", 0),
                  ("power", 3), ("power", 4), ("power", 5), ("quotient", 0)]


def _random_range(rng, kind):
    if kind == "log":
        lo = rng.uniform(0.01, 5)
    elif kind == "sqrt":
        lo = 0.0 if rng.random() < 0.3 else rng.uniform(0, 5)
    else:
        lo = rng.uniform(-5, 5)
    width = rng.uniform(0, 1e-3) if rng.random() < 0.2 else rng.uniform(0, 10)
    return lo, lo + width


def _random_atom_and_box(rng, kind, k):
    from lbminlp.expr import Interval, interval
    from lbminlp.relax import Atom

    x_lo, x_hi = _random_range(rng, kind)
    if kind == "bilinear":
        y_lo, y_hi = _random_range(rng, kind)
        return Atom(2, kind, (0, 1)), [Interval(x_lo, x_hi), Interval(y_lo, y_hi)]
    if kind == "quotient":
        # w = (2 x0 + 1) / x1 with the denominator box on one side of 0
        d_lo = rng.uniform(0.2, 3)
        d_hi = d_lo + rng.uniform(0, 3)
        if rng.random() < 0.5:
            d_lo, d_hi = -d_hi, -d_lo
        atom = Atom(2, kind, (1,), coefs=((0, 2.0),), constant=1.0)
        box = [Interval(x_lo, x_hi), Interval(d_lo, d_hi)]
        return atom, box + [interval(atom.expression(), box + [Interval(0, 0)])]
    return Atom(1, kind, (0,), exponent=k), [Interval(x_lo, x_hi)]


def envelope_worst_slack(kind: str, k: int, boxes: int = 100, samples: int = 1000,
                         seed: int = 0) -> float:
    """Smallest scaled slack of any envelope row over random boxes and samples.

    Inputs are drawn uniformly in each box (corners included); the atom's
    output is computed exactly with the reference evaluator.  A valid
    envelope never goes below roughly ``-1e-15``.
    """
    from lbminlp.relax import envelope
    from oracles import vectorized

    rng = np.random.default_rng([seed, len(kind), k])
    worst = np.inf
    for _ in range(boxes):
        atom, box = _random_atom_and_box(rng, kind, k)
        n_in = len(atom.inputs) if kind != "quotient" else 2
        padded = box + [_whole()] * (atom.output + 1 - len(box))
        rows = envelope(atom, padded)
        lo = np.array([b.lo for b in box[:n_in]])
        hi = np.array([b.hi for b in box[:n_in]])
        X = rng.uniform(lo, hi, (samples, n_in))
        X[0], X[1] = lo, hi
        P = np.zeros((atom.output + 1, samples))
        P[:n_in] = X.T
        with np.errstate(all="ignore"):
            P[atom.output] = vectorized(atom.expression())(P)
        for coefs, rel, rhs in rows:
            terms = np.array([v * P[j] for j, v in coefs.items()])
            lhs = terms.sum(axis=0)
            s = {"<=": rhs - lhs, ">=": lhs - rhs, "=": -np.abs(lhs - rhs)}[rel]
            scale = np.maximum(np.maximum(1.0, abs(rhs)), np.abs(terms).max(axis=0))
            worst = min(worst, float(np.min(s / scale)))
    return worst


def _whole():
    from lbminlp.expr import Interval
    return Interval(-np.inf, np.inf)
