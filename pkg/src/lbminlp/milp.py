"""Best-first branch-and-bound over :mod:`lbminlp.lp`.

Branching picks the most fractional integer column (lowest index on
ties).  Open nodes are ordered by their parent's LP bound, deeper nodes
first on equal bounds, then by creation order, so the search is fully
deterministic for a given input.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lp import LpProblem, LpStatus, solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6


class MilpStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE_LIMIT = "feasible_limit"
    INFEASIBLE = "infeasible"
    LIMIT_NO_SOLUTION = "limit_no_solution"
    UNBOUNDED = "unbounded"


@dataclass
class MilpProblem:
    lp: LpProblem
    integers: tuple[int, ...]
    cuts: list[tuple[dict[int, float], str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.integers = tuple(sorted(set(self.integers)))
        for j in self.integers:
            if not (math.isfinite(self.lp.lb[j]) and math.isfinite(self.lp.ub[j])):
                raise ValueError(f"integer column {j} needs finite bounds")

    def full_lp(self) -> LpProblem:
        lp = self.lp.copy()
        for row in self.cuts:
            lp.add_row(*row)
        return lp


@dataclass
class MilpResult:
    status: MilpStatus
    x: np.ndarray | None
    objective: float
    nodes: int
    wall_time: float

    @property
    def has_point(self) -> bool:
        return self.x is not None


def add_cut(m: MilpProblem, row: tuple[dict[int, float], str, float]) -> MilpProblem:
    """Return a copy of ``m`` with one more row in its cut pool."""
    coefs, rel, rhs = row
    m.lp._check_row(coefs, rel)
    return MilpProblem(m.lp, m.integers, m.cuts + [(dict(coefs), rel, float(rhs))])


def _most_fractional(x, integers) -> int:
    best, best_frac = -1, INT_TOL
    for j in integers:
        frac = abs(x[j] - round(x[j]))
        if frac > best_frac + 1e-12:
            best, best_frac = j, frac
    return best


def solve_milp(m: MilpProblem, time_limit: float = math.inf, node_limit: int = 1_000_000,
               lp_iteration_limit: int = 10_000, verbose: bool = False) -> MilpResult:
    start = time.perf_counter()
    base = m.full_lp()
    lb0 = base.lb.copy()
    ub0 = base.ub.copy()
    for j in m.integers:
        lb0[j] = math.ceil(lb0[j] - INT_TOL)
        ub0[j] = math.floor(ub0[j] + INT_TOL)

    incumbent, inc_obj = None, math.inf
    heap = [(-math.inf, 0, 0, lb0, ub0)]
    counter = 1
    nodes = 0
    exhausted = True
    unbounded = False

    while heap:
        if nodes >= node_limit or time.perf_counter() - start > time_limit:
            exhausted = False
            break
        bound, negdepth, _, lb, ub = heapq.heappop(heap)
        if bound >= inc_obj - 1e-9:
            continue
        nodes += 1
        lp = LpProblem(base.c, lb, ub, base.rows)
        res = solve_lp(lp, lp_iteration_limit)
        if res.status is LpStatus.INFEASIBLE:
            continue
        if res.status is LpStatus.UNBOUNDED:
            unbounded = True
            break
        if res.status is LpStatus.ITERATION_LIMIT:
            # cannot prune this node soundly, so optimality is not proven
            exhausted = False
            continue
        if res.objective >= inc_obj - 1e-9:
            continue
        j = _most_fractional(res.x, m.integers)
        if verbose:
            log.info("node %d depth %d bound %.6g incumbent %.6g", nodes, -negdepth,
                     res.objective, inc_obj)
        if j < 0:
            incumbent, inc_obj = res.x, res.objective
            continue
        v = res.x[j]
        down_ub = ub.copy()
        down_ub[j] = math.floor(v)
        up_lb = lb.copy()
        up_lb[j] = math.ceil(v)
        heapq.heappush(heap, (res.objective, negdepth - 1, counter, lb, down_ub))
        heapq.heappush(heap, (res.objective, negdepth - 1, counter + 1, up_lb, ub))
        counter += 2

    elapsed = time.perf_counter() - start
    if unbounded:
        return MilpResult(MilpStatus.UNBOUNDED, None, -math.inf, nodes, elapsed)
    if incumbent is None:
        status = MilpStatus.INFEASIBLE if exhausted else MilpStatus.LIMIT_NO_SOLUTION
        return MilpResult(status, None, math.nan, nodes, elapsed)
    status = MilpStatus.OPTIMAL if exhausted else MilpStatus.FEASIBLE_LIMIT
    return MilpResult(status, incumbent, inc_obj, nodes, elapsed)


def l1_objective(lp: LpProblem, x_prime, integers, n: int | None = None) -> MilpProblem:
    """Minimize the L1 distance of the first ``n`` columns of ``lp`` to ``x_prime``.

    Adds one column ``d_i >= |x_i - x'_i|`` per measured column; the original
    objective of ``lp`` is discarded.
    """
    x_prime = np.asarray(x_prime, dtype=float)
    n = x_prime.size if n is None else n
    base = lp.ncols
    c = np.concatenate([np.zeros(base), np.ones(n)])
    lb = np.concatenate([lp.lb, np.zeros(n)])
    ub = np.concatenate([lp.ub, np.full(n, math.inf)])
    out = LpProblem(c, lb, ub, list(lp.rows))
    for i in range(n):
        d = base + i
        out.add_row({d: 1.0, i: -1.0}, ">=", -x_prime[i])
        out.add_row({d: 1.0, i: 1.0}, ">=", x_prime[i])
    return MilpProblem(out, tuple(integers))
