"""Bounded-variable primal simplex.

Each row ``a x (<=|>=|=) b`` gets a slack column ``s`` with ``a x + s = b``;
rows whose slack cannot start inside its bounds get an artificial column
and phase 1 minimizes the sum of artificials.  Pricing is Dantzig's rule,
switching to Bland's rule after a streak of degenerate pivots and back
after the next non-degenerate one.  The basis inverse is recomputed every
iteration, which is fine at the problem sizes this package targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-7
DEGENERATE_STREAK = 20


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpProblem:
    """``min c x`` subject to ``rows`` and column bounds ``lb <= x <= ub``.

    Rows are ``(coefficients, relation, rhs)`` with sparse ``{column: value}``
    coefficients and relation one of ``"<="``, ``">="``, ``"="``.
    """

    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    rows: list[tuple[dict[int, float], str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        if not (self.c.shape == self.lb.shape == self.ub.shape) or self.c.ndim != 1:
            raise ValueError("c, lb and ub must be vectors of the same length")
        for coefs, rel, _ in self.rows:
            self._check_row(coefs, rel)

    @property
    def ncols(self) -> int:
        return self.c.size

    def _check_row(self, coefs, rel):
        if rel not in ("<=", ">=", "="):
            raise ValueError(f"bad relation {rel!r}")
        for j in coefs:
            if not 0 <= j < self.ncols:
                raise ValueError(f"row references column {j}, have {self.ncols}")

    def add_row(self, coefs: dict[int, float], rel: str, rhs: float) -> None:
        self._check_row(coefs, rel)
        self.rows.append((dict(coefs), rel, float(rhs)))

    def copy(self) -> LpProblem:
        return LpProblem(self.c.copy(), self.lb.copy(), self.ub.copy(), list(self.rows))

    def dense(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        A = np.zeros((len(self.rows), self.ncols))
        for i, (coefs, _, _) in enumerate(self.rows):
            for j, v in coefs.items():
                A[i, j] += v
        return A, [r[1] for r in self.rows], np.array([r[2] for r in self.rows], dtype=float)

    def max_violation(self, x) -> float:
        """Largest row or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        viol = float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0)))
        for coefs, rel, rhs in self.rows:
            lhs = sum(v * x[j] for j, v in coefs.items())
            if rel in ("<=", "="):
                viol = max(viol, lhs - rhs)
            if rel in (">=", "="):
                viol = max(viol, rhs - lhs)
        return viol


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int


class _Simplex:
    def __init__(self, M, b, lb, ub, cost, basis, x, iteration_limit):
        self.M, self.b = M, b
        self.lb, self.ub = lb, ub
        self.cost = cost
        self.basis = basis
        self.x = x
        self.limit = iteration_limit
        self.iterations = 0
        self.is_basic = np.zeros(M.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.movable = (ub - lb) > 0.0

    def _refresh(self):
        m = len(self.basis)
        if m == 0:
            self.Binv = np.zeros((0, 0))
            return
        B = self.M[:, self.basis]
        self.Binv = np.linalg.inv(B)
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.Binv @ (self.b - self.M @ xn)

    def run(self) -> str:
        """Iterate to optimality; returns ``optimal``, ``unbounded`` or ``limit``."""
        streak = 0
        bland = False
        while True:
            self._refresh()
            if self.iterations >= self.limit:
                return "limit"
            cb = self.cost[self.basis]
            y = cb @ self.Binv if self.basis else np.zeros(0)
            d = self.cost - y @ self.M if self.basis else self.cost.copy()
            x, lb, ub = self.x, self.lb, self.ub
            at_lb = np.isfinite(lb) & (x <= lb + FEAS_TOL)
            at_ub = np.isfinite(ub) & (x >= ub - FEAS_TOL)
            cand = ~self.is_basic & self.movable
            up = cand & ~at_ub & (d < -OPT_TOL)
            down = cand & ~at_lb & (d > OPT_TOL)
            eligible = up | down
            if not eligible.any():
                return "optimal"
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if up[q] else -1.0

            alpha = self.Binv @ self.M[:, q] if self.basis else np.zeros(0)
            delta = -direction * alpha
            t_best = ub[q] - lb[q]
            ratios = []
            for pos, j in enumerate(self.basis):
                dl = delta[pos]
                if dl < -PIVOT_TOL and math.isfinite(lb[j]):
                    ratios.append((max(x[j] - lb[j], 0.0) / -dl, pos))
                elif dl > PIVOT_TOL and math.isfinite(ub[j]):
                    ratios.append((max(ub[j] - x[j], 0.0) / dl, pos))
            leave = -1
            if ratios:
                t_min = min(t for t, _ in ratios)
                if t_min < t_best:
                    # Bland: smallest variable index; otherwise the largest pivot
                    ties = [pos for t, pos in ratios if t <= t_min + 1e-12]
                    if bland:
                        leave = min(ties, key=lambda p: self.basis[p])
                    else:
                        leave = min(ties, key=lambda p: (-abs(delta[p]), self.basis[p]))
                    t_best = t_min
            if math.isinf(t_best):
                return "unbounded"
            self.iterations += 1
            x[q] += direction * t_best
            if self.basis:
                x[self.basis] += delta * t_best
            if leave >= 0:
                j = self.basis[leave]
                x[j] = lb[j] if delta[leave] < 0 else ub[j]
                self.is_basic[j] = False
                self.is_basic[q] = True
                self.basis[leave] = q
            else:
                x[q] = ub[q] if direction > 0 else lb[q]
            if t_best <= 1e-12:
                streak += 1
                if streak >= DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0
                bland = False


def solve_lp(lp: LpProblem, iteration_limit: int = 10_000) -> LpResult:
    """Minimize ``lp``; the result point covers the structural columns only."""
    n = lp.ncols
    A, rels, b = lp.dense()
    m = len(rels)
    slack_lb = np.array([0.0 if r in ("<=", "=") else -math.inf for r in rels])
    slack_ub = np.array([0.0 if r in (">=", "=") else math.inf for r in rels])

    x_struct = np.where(np.isfinite(lp.lb), lp.lb, np.where(np.isfinite(lp.ub), lp.ub, 0.0))
    for j in range(n):
        if lp.lb[j] > lp.ub[j]:
            return LpResult(LpStatus.INFEASIBLE, None, math.nan, 0)
    resid = b - A @ x_struct if m else np.zeros(0)

    art_rows, art_sign = [], []
    slack_val = resid.copy()
    basis = []
    for i in range(m):
        if slack_lb[i] - FEAS_TOL <= resid[i] <= slack_ub[i] + FEAS_TOL:
            basis.append(n + i)
        else:
            slack_val[i] = slack_lb[i] if resid[i] < slack_lb[i] else slack_ub[i]
            art_rows.append(i)
            art_sign.append(1.0 if resid[i] - slack_val[i] > 0 else -1.0)

    na = len(art_rows)
    M = np.zeros((m, n + m + na))
    M[:, :n] = A
    M[:, n:n + m] = np.eye(m)
    x = np.concatenate([x_struct, slack_val, np.zeros(na)])
    lb = np.concatenate([lp.lb, slack_lb, np.zeros(na)])
    ub = np.concatenate([lp.ub, slack_ub, np.full(na, math.inf)])
    for k, (i, s) in enumerate(zip(art_rows, art_sign)):
        M[i, n + m + k] = s
        x[n + m + k] = abs(resid[i] - slack_val[i])
        basis.append(n + m + k)
    # keep the basis in row order so B starts as a signed identity
    basis.sort(key=lambda j: j - n if j < n + m else art_rows[j - n - m])

    iterations = 0
    if na:
        cost1 = np.zeros(n + m + na)
        cost1[n + m:] = 1.0
        sx = _Simplex(M, b, lb, ub, cost1, basis, x, iteration_limit)
        outcome = sx.run()
        iterations = sx.iterations
        if outcome == "limit":
            return LpResult(LpStatus.ITERATION_LIMIT, None, math.nan, iterations)
        infeas = float(np.sum(sx.x[n + m:]))
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0))):
            return LpResult(LpStatus.INFEASIBLE, None, math.nan, iterations)
        x = sx.x
        basis = sx.basis
        ub = ub.copy()
        ub[n + m:] = 0.0
        x[n + m:] = np.where(sx.is_basic[n + m:], x[n + m:], 0.0)

    cost2 = np.zeros(n + m + na)
    cost2[:n] = lp.c
    sx = _Simplex(M, b, lb, ub, cost2, basis, x, iteration_limit - iterations)
    outcome = sx.run()
    iterations += sx.iterations
    point = sx.x[:n].copy()
    obj = float(lp.c @ point)
    if outcome == "unbounded":
        return LpResult(LpStatus.UNBOUNDED, point, -math.inf, iterations)
    if outcome == "limit":
        return LpResult(LpStatus.ITERATION_LIMIT, point, obj, iterations)
    return LpResult(LpStatus.OPTIMAL, point, obj, iterations)
