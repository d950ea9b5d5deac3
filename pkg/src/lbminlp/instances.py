"""Small reproducible instances: the toy problem T1 and seeded generators."""

from __future__ import annotations

import numpy as np

from . import expr as ex
from .model import Instance, RawConstraint, Relation, Variable, VarKind

BIN = VarKind.BINARY


def t1() -> tuple[Instance, np.ndarray]:
    """Two binaries ``y0, y1`` and ``x in [0, 4]``::

        min  -x - 2 y0 - 3 y1
        s.t. x^2 - 4 - 4 y0 <= 0
             x y1 <= 2

    Returns the instance and the feasible incumbent ``(y, x) = (0, 0, 2)``
    with objective -2.  Variable order is ``y0, y1, x``.
    """
    variables = [Variable("y0", 0, 1, BIN), Variable("y1", 0, 1, BIN), Variable("x", 0, 4)]
    objective = ex.parse("(- (- (- 0 x2) (* 2 x0)) (* 3 x1))")
    constraints = [
        RawConstraint(ex.parse("(- (^ x2 2) (* 4 x0))"), Relation.LE, 4.0, "square_cap"),
        RawConstraint(ex.parse("(* x2 x1)"), Relation.LE, 2.0, "bilinear_cap"),
    ]
    return Instance(variables, objective, constraints, "T1"), np.array([0.0, 0.0, 2.0])


def _round(v: float) -> float:
    return float(np.round(v, 3))


def random_nonconvex(seed: int, n_bin: int = 4, n_cont: int = 2) -> tuple[Instance, np.ndarray]:
    """Capacity-expansion style instance with bilinear and quadratic terms.

    Binaries ``y`` open capacity for continuous activities ``x`` in ``[0, 4]``
    and cost ``c_i`` each; the objective rewards activity through a
    nonconvex bilinear term.  The returned incumbent ``y = 0, x = 0`` is
    feasible and deliberately poor.
    """
    rng = np.random.default_rng(seed)
    nb, nc = n_bin, n_cont
    variables = [Variable(f"y{i}", 0, 1, BIN) for i in range(nb)]
    variables += [Variable(f"x{j}", 0, 4) for j in range(nc)]
    y = [ex.var(i) for i in range(nb)]
    x = [ex.var(nb + j) for j in range(nc)]

    cost = [_round(rng.uniform(0.5, 3.0)) for _ in range(nb)]
    reward = [_round(rng.uniform(0.5, 1.5)) for _ in range(nc)]
    terms = [c * yi for c, yi in zip(cost, y)] + [-r * xj for r, xj in zip(reward, x)]
    for j in range(nc - 1):
        terms.append(-_round(rng.uniform(0.2, 0.8)) * x[j] * x[j + 1])
    objective = ex.add(*terms)

    constraints = []
    owner = rng.integers(0, nc, size=nb)
    for j in range(nc):
        gain = [(_round(rng.uniform(0.5, 2.0)), y[i]) for i in range(nb) if owner[i] == j]
        cap = ex.add(*[g * yi for g, yi in gain]) if gain else ex.const(0.0)
        if j % 2 == 0:
            lhs = x[j] - cap
        else:
            lhs = ex.power(x[j], 2) - 2.0 * cap
        constraints.append(RawConstraint(lhs, Relation.LE, 1.0, f"capacity{j}"))
    if nc >= 2:
        constraints.append(RawConstraint(x[0] * x[1], Relation.LE,
                                         _round(rng.uniform(3.0, 6.0)), "interaction"))
    constraints.append(RawConstraint(ex.add(*y), Relation.LE, float(max(1, nb - 1)), "budget"))
    inst = Instance(variables, objective, constraints, f"nonconvex-{seed}")
    return inst, np.zeros(nb + nc)


def random_interior(seed: int, n_bin: int = 3, n_cont: int = 2) -> Instance:
    """Instance built around a known integral point ``p`` that satisfies
    every constraint strictly (slack at least 0.5)."""
    rng = np.random.default_rng(seed)
    nb, nc = n_bin, n_cont
    n = nb + nc
    variables = [Variable(f"y{i}", 0, 1, BIN) for i in range(nb)]
    variables += [Variable(f"x{j}", -3, 3) for j in range(nc)]
    p = np.concatenate([rng.integers(0, 2, nb), rng.uniform(-1, 1, nc)]).round(3)
    xs = [ex.var(i) for i in range(n)]
    constraints = []
    # ball around the continuous part of p
    ball = ex.add(*[ex.power(xs[nb + j] - float(p[nb + j]), 2) for j in range(nc)])
    constraints.append(RawConstraint(ball, Relation.LE, 1.0, "ball"))
    # bilinear coupling, shifted so p has slack 0.5
    for r in range(2):
        i, j = int(rng.integers(0, nb)), nb + int(rng.integers(0, nc))
        a = _round(rng.uniform(-2, 2))
        g = a * xs[i] * xs[j] + _round(rng.uniform(-1, 1)) * xs[(i + 1) % n]
        val = ex.evaluate(g, p)
        constraints.append(RawConstraint(g, Relation.LE, _round(val + 0.5 + 1e-3), f"couple{r}"))
    constraints.append(RawConstraint(ex.add(*xs[:nb]), Relation.GE,
                                     float(p[:nb].sum()) - 0.5, "cover"))
    objective = ex.add(*[_round(rng.uniform(-1, 1)) * v for v in xs])
    return Instance(variables, objective, constraints, f"interior-{seed}")


def random_infeasible(seed: int) -> Instance:
    """Contradictory instance: a linear pair with a gap plus a nonlinear row.

    ``max_j g_j`` is at least half the gap everywhere, so it stays positive.
    """
    rng = np.random.default_rng(seed)
    gap = _round(rng.uniform(0.5, 2.0))
    variables = [Variable("y0", 0, 1, BIN), Variable("x0", -2, 2), Variable("x1", -2, 2)]
    s = ex.parse("(+ x1 x2 x0)")
    constraints = [
        RawConstraint(s, Relation.GE, 1.0 + gap, "low"),
        RawConstraint(s, Relation.LE, 1.0, "high"),
        RawConstraint(ex.parse("(* x1 x2)"), Relation.LE, 3.0, "bilinear"),
    ]
    return Instance(variables, ex.parse("(+ x1 (^ x2 2))"), constraints, f"infeasible-{seed}")
