"""Local NLP solver: augmented Lagrangian over ``g_j(x) <= 0`` with box
bounds handled exactly by projection.

The outer loop minimizes

    L(x) = f(x) + 1/(2 rho) * sum_j (max(0, lam_j + rho g_j(x))**2 - lam_j**2)

over the box, then updates ``lam_j <- max(0, lam_j + rho g_j)`` and raises
``rho`` tenfold whenever the constraint/complementarity measure did not
shrink by a factor of four.  The inner solver is projected gradient with
limited-memory BFGS scaling on the free variables and an Armijo backtracking
search along the projection arc.  Points where a function cannot be
evaluated count as an infinite merit value, so the line search backs off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import expr as ex
from .expr import DomainError
from .model import Problem

ARMIJO = 1e-4


class NlpStatus(str, Enum):
    LOCALLY_OPTIMAL = "locally_optimal"
    FEASIBLE_POINT = "feasible_point"
    FAILED = "failed"


@dataclass
class NlpConfig:
    max_outer: int = 30
    max_inner: int = 200
    feas_tol: float = 1e-6
    stationarity_tol: float = 1e-5
    complementarity_tol: float = 1e-5
    penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e12
    shrink: float = 0.25
    memory: int = 8


@dataclass
class NlpTask:
    """A single-start local solve.

    Integrality of ``problem`` is ignored.  Coordinates flagged in ``fixed``
    (and those with ``lb == ub``) are frozen at their start value.
    """

    problem: Problem
    start: np.ndarray
    fixed: np.ndarray | None = None
    config: NlpConfig = field(default_factory=NlpConfig)


@dataclass
class NlpResult:
    x: np.ndarray
    objective: float
    max_violation: float
    status: NlpStatus
    outer_iterations: int
    multipliers: np.ndarray
    penalty: float
    stationarity: float

    @property
    def ok(self) -> bool:
        return self.status is not NlpStatus.FAILED


class _Functions:
    def __init__(self, pr: Problem):
        self.f = pr.objective
        self.g = list(pr.constraints)
        self.n = pr.n

    def values(self, x):
        return ex.evaluate(self.f, x), np.array([ex.evaluate(g, x) for g in self.g])

    def gradients(self, x):
        fv, gf = ex.value_and_gradient(self.f, x)
        gv = np.empty(len(self.g))
        J = np.zeros((len(self.g), self.n))
        for j, g in enumerate(self.g):
            gv[j], J[j] = ex.value_and_gradient(g, x)
        return fv, gv, gf, J


def _merit(fv, gv, lam, rho):
    if gv.size == 0:
        return fv
    return fv + (np.sum(np.maximum(0.0, lam + rho * gv) ** 2) - np.sum(lam ** 2)) / (2.0 * rho)


def augmented_lagrangian(pr: Problem, x, lam, rho) -> tuple[float, np.ndarray]:
    """Value and gradient of the augmented Lagrangian used by :func:`solve_local`."""
    fv, gv, gf, J = _Functions(pr).gradients(np.asarray(x, dtype=float))
    mult = np.maximum(0.0, lam + rho * gv)
    return _merit(fv, gv, lam, rho), gf + (mult @ J if gv.size else 0.0)


def projected_gradient_norm(x, grad, lb, ub, free) -> float:
    step = np.clip(x - grad, lb, ub) - x
    return float(np.max(np.abs(step[free]), initial=0.0))


class _Inner:
    """Projected L-BFGS on the merit function for fixed (lam, rho)."""

    def __init__(self, fns: _Functions, lb, ub, free, cfg: NlpConfig):
        self.fns = fns
        self.lb, self.ub, self.free = lb, ub, free
        self.cfg = cfg

    def merit(self, x, lam, rho) -> float:
        try:
            fv, gv = self.fns.values(x)
        except DomainError:
            return math.inf
        return _merit(fv, gv, lam, rho)

    def merit_grad(self, x, lam, rho):
        fv, gv, gf, J = self.fns.gradients(x)
        mult = np.maximum(0.0, lam + rho * gv)
        grad = gf + (mult @ J if gv.size else 0.0)
        grad = np.where(self.free, grad, 0.0)
        return _merit(fv, gv, lam, rho), grad

    def _direction(self, grad, active, mem):
        q = np.where(active, 0.0, -grad)
        alphas = []
        for s, y, r in reversed(mem):
            a = r * (s @ q)
            alphas.append(a)
            q = q - a * y
        if mem:
            s, y, _ = mem[-1]
            q *= (s @ y) / (y @ y)
        for (s, y, r), a in zip(mem, reversed(alphas)):
            b = r * (y @ q)
            q = q + (a - b) * s
        return np.where(active, 0.0, q)

    def solve(self, x, lam, rho) -> tuple[np.ndarray, bool, float]:
        """Returns ``(x, converged, projected gradient norm)``."""
        lb, ub, free = self.lb, self.ub, self.free
        try:
            phi, grad = self.merit_grad(x, lam, rho)
        except DomainError:
            return x, False, math.inf
        mem: list[tuple[np.ndarray, np.ndarray, float]] = []
        pg = projected_gradient_norm(x, grad, lb, ub, free)
        for _ in range(self.cfg.max_inner):
            if pg <= self.cfg.stationarity_tol:
                return x, True, pg
            active = ~free | ((x <= lb) & (grad > 0)) | ((x >= ub) & (grad < 0))
            candidates = []
            if mem:
                d = self._direction(grad, active, mem)
                if grad @ d < -1e-14 * np.linalg.norm(grad) * np.linalg.norm(d):
                    candidates.append((d, 1.0))
            d = np.where(active, 0.0, -grad)
            candidates.append((d, 1.0 / max(1.0, float(np.max(np.abs(d), initial=0.0)))))
            accepted = None
            for d, alpha in candidates:
                for _ in range(60):
                    xn = np.where(free, np.clip(x + alpha * d, lb, ub), x)
                    decrease = grad @ (xn - x)
                    if decrease < 0.0:
                        phin = self.merit(xn, lam, rho)
                        if phin <= phi + ARMIJO * decrease:
                            accepted = xn
                            break
                    alpha *= 0.5
                if accepted is not None:
                    break
                mem.clear()
            if accepted is None:
                return x, False, pg
            xn = accepted
            try:
                phin, gn = self.merit_grad(xn, lam, rho)
            except DomainError:
                return x, False, pg
            s, y = xn - x, gn - grad
            sy = s @ y
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                mem.append((s, y, 1.0 / sy))
                if len(mem) > self.cfg.memory:
                    mem.pop(0)
            x, phi, grad = xn, phin, gn
            pg = projected_gradient_norm(x, grad, lb, ub, free)
        return x, pg <= self.cfg.stationarity_tol, pg


def _evaluable_start(fns: _Functions, x, lb, ub, free):
    try:
        fns.values(x)
        return x
    except DomainError:
        pass
    center = np.where(np.isfinite(lb) & np.isfinite(ub), 0.5 * (lb + ub),
                      np.where(np.isfinite(lb), lb + 1.0, np.where(np.isfinite(ub), ub - 1.0, 0.0)))
    for t in np.linspace(0.1, 1.0, 10):
        y = np.where(free, x + t * (center - x), x)
        try:
            fns.values(y)
            return y
        except DomainError:
            continue
    return None


def solve_local(task: NlpTask) -> NlpResult:
    pr, cfg = task.problem, task.config
    lb, ub = pr.lb.copy(), pr.ub.copy()
    x = np.clip(np.asarray(task.start, dtype=float), lb, ub)
    fixed = lb == ub
    if task.fixed is not None:
        fixed = fixed | np.asarray(task.fixed, dtype=bool)
    lb = np.where(fixed, x, lb)
    ub = np.where(fixed, x, ub)
    free = ~fixed
    fns = _Functions(pr)
    m = len(fns.g)
    lam = np.zeros(m)
    rho = cfg.penalty

    def failed(point, k):
        return NlpResult(point, math.inf, math.inf, NlpStatus.FAILED, k, lam, rho, math.inf)

    x0 = _evaluable_start(fns, x, lb, ub, free)
    if x0 is None:
        return failed(x, 0)
    f0, g0 = fns.values(x0)
    start_viol = float(max(np.max(g0, initial=0.0), 0.0))
    best = (f0, x0.copy()) if start_viol <= cfg.feas_tol else None

    x = x0
    prev_measure = math.inf
    inner = _Inner(fns, lb, ub, free, cfg)
    outer = 0
    status = NlpStatus.FAILED
    pg = math.inf
    lam_used = lam
    for outer in range(1, cfg.max_outer + 1):
        x, converged, pg = inner.solve(x, lam, rho)
        fv, gv = fns.values(x)
        viol = float(max(np.max(gv, initial=0.0), 0.0))
        measure = float(np.max(np.abs(np.maximum(gv, -lam / rho)), initial=0.0))
        if viol <= cfg.feas_tol and (best is None or fv < best[0]):
            best = (fv, x.copy())
        lam_used = lam
        if converged and viol <= cfg.feas_tol and measure <= cfg.complementarity_tol:
            status = NlpStatus.LOCALLY_OPTIMAL
            break
        lam = np.maximum(0.0, lam + rho * gv)
        if measure > cfg.shrink * prev_measure:
            rho = min(rho * cfg.penalty_growth, cfg.max_penalty)
        prev_measure = measure

    fv, gv = fns.values(x)
    viol = float(max(np.max(gv, initial=0.0), 0.0))
    if status is not NlpStatus.LOCALLY_OPTIMAL:
        status = NlpStatus.FEASIBLE_POINT if viol <= cfg.feas_tol else NlpStatus.FAILED
    # never hand back something worse than the best feasible point seen
    if best is not None and (status is NlpStatus.FAILED or fv > best[0] + 1e-9):
        fv, x = best
        viol = float(max(np.max(fns.values(x)[1], initial=0.0), 0.0))
        status = NlpStatus.FEASIBLE_POINT
    return NlpResult(x, fv, viol, status, outer, lam_used, rho, pg)
