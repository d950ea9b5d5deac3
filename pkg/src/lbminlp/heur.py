"""Local branching for MINLPs: an improvement heuristic and a feasibility
heuristic built from the same MILP/NLP pipeline.

Improvement (:func:`improve`), starting from a feasible incumbent ``x_bar``:

1. Solve the continuous relaxation plus the local branching row
   ``sum_{x_bar_i=1} (1 - x_i) + sum_{x_bar_i=0} x_i <= k`` with the local
   NLP solver, warm-started at ``x_bar``, giving ``x'``.
2. Repeat: find the integral point ``x''`` of the linear relaxation (plus the
   local branching row and all reverse cuts so far) nearest to ``x'`` in L1
   distance; fix its integers and run the NLP from ``x''`` to get ``x*``.
   Stop if ``x*`` is feasible and strictly better than ``x_bar``; otherwise
   add the reverse cut ``sum_{x*_i=1} (1 - x_i) + sum_{x*_i=0} x_i >= 1``,
   which removes the binary pattern of ``x*``.

Feasibility (:func:`find_feasible`): pick ``x'`` among multistart minima of
``min t s.t. g_j(x) <= t`` (deep interior points), then run the same
MILP/NLP step without a local branching row.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import expr as ex
from . import relax
from .milp import MilpStatus, l1_objective, solve_milp
from .model import (FEAS_TOL, INT_TOL, Problem, Solution, Variable, fix_integers,
                    is_feasible, relax_integrality)
from .nlp import NlpConfig, NlpResult, NlpStatus, NlpTask, solve_local

log = logging.getLogger(__name__)

IMPROVEMENT_MARGIN = 1e-9
EPIGRAPH_BOUND = 1e6


class LocalBranchingError(ValueError):
    """Precondition violated (no binaries, infeasible incumbent, ...)."""


class Outcome(str, Enum):
    IMPROVED = "improved"
    EXHAUSTED = "exhausted"
    LIMIT_REACHED = "limit_reached"
    SOLVER_FAILURE = "solver_failure"


def compute_k(b: int) -> int:
    """Neighbourhood size ``min(15, max(1, floor(b / 2)))`` for ``b`` binaries."""
    if b < 0:
        raise ValueError("b must be non-negative")
    return min(15, max(1, b // 2))


def _binary_pattern(point, binaries, tol) -> dict[int, int]:
    pattern = {}
    for i in binaries:
        v = float(point[i])
        r = round(v)
        if r not in (0, 1) or abs(v - r) > tol:
            raise LocalBranchingError(f"x{i} = {v!r} is not binary")
        pattern[i] = int(r)
    return pattern


def _flip_count_row(point, binaries, tol):
    # sum_{p_i=1} (1 - x_i) + sum_{p_i=0} x_i  ==  coefs . x + ones
    pattern = _binary_pattern(point, binaries, tol)
    coefs = {i: (-1.0 if p else 1.0) for i, p in pattern.items()}
    return coefs, sum(pattern.values())


def lb_constraint(x_bar, binaries, k: int, tol: float = INT_TOL):
    """Local branching row: at most ``k`` binaries may flip relative to ``x_bar``."""
    coefs, ones = _flip_count_row(x_bar, binaries, tol)
    return coefs, "<=", float(k - ones)


def reverse_cut(x_star, binaries, tol: float = INT_TOL):
    """Row excluding exactly the binary pattern of ``x_star``."""
    if not binaries:
        raise LocalBranchingError("reverse cut over an empty binary set is infeasible")
    coefs, ones = _flip_count_row(x_star, binaries, tol)
    return coefs, ">=", float(1 - ones)


def row_expression(row) -> ex.Expr:
    """``g(x) <= 0`` form of a linear row with relation ``<=`` or ``>=``."""
    coefs, rel, rhs = row
    body = ex.linear(coefs, -rhs)
    if rel == "<=":
        return body
    if rel == ">=":
        return ex.linear({i: -a for i, a in coefs.items()}, rhs)
    raise ValueError(f"unsupported relation {rel!r}")


def row_satisfied(row, point, tol: float = 0.0) -> bool:
    coefs, rel, rhs = row
    lhs = sum(a * point[i] for i, a in coefs.items())
    if rel == "<=":
        return lhs <= rhs + tol
    if rel == ">=":
        return lhs >= rhs - tol
    return abs(lhs - rhs) <= tol


@dataclass
class LbConfig:
    k: int | None = None  # None: compute_k(|B|)
    max_iterations: int = 10
    milp_time_limit: float = 2.0
    milp_node_limit: int = 100_000
    time_limit: float | None = None
    feas_tol: float = FEAS_TOL
    int_tol: float = INT_TOL
    check_incumbent: bool = True
    nlp: NlpConfig = field(default_factory=NlpConfig)

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    x_double_prime: np.ndarray
    milp_status: str
    x_star: np.ndarray
    x_star_feasible: bool
    x_star_objective: float
    cut_added: bool
    elapsed: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "iteration": self.iteration,
            "milp_status": self.milp_status,
            "x_double_prime": [float(v) for v in self.x_double_prime],
            "x_star": [float(v) for v in self.x_star],
            "x_star_feasible": self.x_star_feasible,
            "objective": _json_float(self.x_star_objective),
            "cut_added": self.cut_added,
        }
        if timing:
            d["time"] = round(self.elapsed, 6)
        return d


@dataclass
class LbTrace:
    x_prime: np.ndarray | None
    k: int
    incumbent_objective: float
    records: list[IterationRecord] = field(default_factory=list)
    outcome: Outcome = Outcome.LIMIT_REACHED
    solution: Solution | None = None
    x_prime_status: str = ""
    elapsed: float = 0.0

    @property
    def improved(self) -> bool:
        return self.outcome is Outcome.IMPROVED

    @property
    def iterations(self) -> int:
        return len(self.records)

    def summary(self, timing: bool = False) -> dict:
        d = {
            "outcome": self.outcome.value,
            "k": self.k,
            "initial_objective": _json_float(self.incumbent_objective),
            "final_objective": _json_float(self.solution.objective if self.solution
                                           else self.incumbent_objective),
            "iterations": self.iterations,
            "improvement_iteration": self.records[-1].iteration if self.improved else None,
        }
        if timing:
            d["time"] = round(self.elapsed, 6)
        return d


def _json_float(v):
    return v if v is None or math.isfinite(v) else None


def write_trace(records: list[dict], summary: dict, path) -> None:
    """One JSON object per line: iteration records, then a summary line."""
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
        fh.write(json.dumps({"summary": summary}, sort_keys=True) + "\n")


def _restore(pr: Problem, x_dd, fallback, cfg_nlp: NlpConfig, int_tol: float):
    """Fixed-integer NLP from ``x_dd``; a second start uses the continuous
    coordinates of ``fallback``.  Returns ``None`` if neither start can be
    evaluated at all."""
    fixed_pr = fix_integers(pr, x_dd, int_tol)
    first = solve_local(NlpTask(fixed_pr, x_dd, config=cfg_nlp))
    if first.status is not NlpStatus.FAILED:
        return first
    start2 = np.array(fallback, dtype=float)
    start2[list(pr.integer_indices)] = np.round(x_dd[list(pr.integer_indices)])
    second = solve_local(NlpTask(fixed_pr, start2, config=cfg_nlp))
    if second.status is not NlpStatus.FAILED:
        return second
    candidates = [r for r in (first, second) if math.isfinite(r.max_violation)]
    if not candidates:
        return None
    return min(candidates, key=lambda r: r.max_violation)


def _objective_or_inf(pr: Problem, x) -> float:
    try:
        return pr.objective_value(x)
    except ex.DomainError:
        return math.inf


def improve(pr: Problem, incumbent, cfg: LbConfig | None = None) -> LbTrace:
    """Try to find a feasible point strictly better than ``incumbent``.

    ``incumbent`` is a :class:`Solution` or a point.
    """
    cfg = cfg or LbConfig()
    start_time = time.perf_counter()
    x_bar = np.asarray(incumbent.point if isinstance(incumbent, Solution) else incumbent,
                       dtype=float)
    binaries = pr.binary_indices
    if not binaries:
        raise LocalBranchingError("local branching needs at least one binary variable")
    ok, viol = is_feasible(pr, x_bar, cfg.feas_tol, cfg.int_tol)
    if not ok:
        if cfg.check_incumbent:
            raise LocalBranchingError(f"incumbent is infeasible (max violation {viol:g})")
        log.warning("incumbent is infeasible (max violation %g); continuing anyway", viol)
        x_bar = x_bar.copy()
        x_bar[list(binaries)] = np.clip(np.round(x_bar[list(binaries)]), 0.0, 1.0)
    f_bar = _objective_or_inf(pr, x_bar)
    k = cfg.k if cfg.k is not None else compute_k(len(binaries))
    lb_row = lb_constraint(x_bar, binaries, k, cfg.int_tol)
    trace = LbTrace(None, k, f_bar)

    # x': continuous relaxation plus the local branching row, warm-started at x_bar
    q_bar = relax_integrality(pr).with_constraints([row_expression(lb_row)], ["local_branching"])
    res = solve_local(NlpTask(q_bar, x_bar, config=cfg.nlp))
    trace.x_prime_status = res.status.value
    x_prime = res.x if res.ok else x_bar.copy()
    trace.x_prime = x_prime

    rel = relax.build(pr)
    cuts = []
    deadline = math.inf if cfg.time_limit is None else start_time + cfg.time_limit
    for it in range(1, cfg.max_iterations + 1):
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            break
        lp = rel.to_lp([lb_row] + cuts)
        milp = l1_objective(lp, x_prime, rel.integers, rel.n)
        mres = solve_milp(milp, min(cfg.milp_time_limit, remaining), cfg.milp_node_limit)
        if mres.status is MilpStatus.INFEASIBLE:
            trace.outcome = Outcome.EXHAUSTED
            break
        if not mres.has_point:
            log.info("iteration %d: MILP stopped without an integral point", it)
            break
        x_dd = mres.x[: pr.n]
        nres = _restore(pr, x_dd, x_prime, cfg.nlp, cfg.int_tol)
        if nres is None:
            trace.outcome = Outcome.SOLVER_FAILURE
            break
        x_star = nres.x
        feasible, _ = is_feasible(pr, x_star, cfg.feas_tol, cfg.int_tol)
        f_star = _objective_or_inf(pr, x_star)
        success = feasible and f_star < f_bar - IMPROVEMENT_MARGIN
        rec = IterationRecord(it, x_dd.copy(), mres.status.value, x_star.copy(), feasible,
                              f_star, not success, time.perf_counter() - start_time)
        trace.records.append(rec)
        log.info("iteration %d: milp %s, x* feasible %s, f(x*) %.6g", it, mres.status.value,
                 feasible, f_star)
        if success:
            trace.outcome = Outcome.IMPROVED
            trace.solution = Solution.from_point(pr, x_star, cfg.int_tol)
            break
        cuts.append(reverse_cut(x_star, binaries, cfg.int_tol))
    trace.elapsed = time.perf_counter() - start_time
    return trace


# -- feasibility heuristic ----------------------------------------------------

@dataclass
class FeasConfig:
    starts: int = 10
    seed: int = 0
    milp_time_limit: float = 2.0
    milp_node_limit: int = 100_000
    slack_tol: float = 1e-6
    time_limit: float | None = None
    feas_tol: float = FEAS_TOL
    int_tol: float = INT_TOL
    workers: int = 1
    sample_width: float = 10.0  # sampling range used for unbounded coordinates
    nlp: NlpConfig = field(default_factory=NlpConfig)

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")


@dataclass
class FeasAttempt:
    start_index: int
    t: float
    milp_status: str
    x_double_prime: np.ndarray | None
    candidate: np.ndarray | None
    feasible: bool
    objective: float

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "start": self.start_index,
            "t": _json_float(self.t),
            "milp_status": self.milp_status,
            "x_double_prime": None if self.x_double_prime is None
            else [float(v) for v in self.x_double_prime],
            "candidate": None if self.candidate is None else [float(v) for v in self.candidate],
            "feasible": self.feasible,
            "objective": _json_float(self.objective),
        }


@dataclass
class FeasResult:
    solution: Solution | None
    minimax: list[float]
    attempts: list[FeasAttempt] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def found(self) -> bool:
        return self.solution is not None


def build_feas_nlp(pr: Problem) -> NlpTask:
    """Epigraph form of ``min_x max_j g_j(x)``: minimize ``t`` subject to
    ``g_j(x) - t <= 0`` over the box, integrality dropped.  ``t`` is the last
    variable; ``t <= 0`` at a solution means the point satisfies every
    constraint, with slack at least ``-t``."""
    base = relax_integrality(pr)
    t = ex.var(pr.n)
    variables = base.variables + (Variable("__t", -EPIGRAPH_BOUND, EPIGRAPH_BOUND),)
    constraints = tuple(g - t for g in base.constraints)
    fp = Problem(variables, t, constraints, base.constraint_names)
    start = np.append(_box_center(pr.lb, pr.ub), 0.0)
    return NlpTask(fp, start)


def _box_center(lb, ub):
    return np.where(np.isfinite(lb) & np.isfinite(ub), 0.5 * (lb + ub),
                    np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0)))


def _epigraph_start(pr: Problem, x0) -> np.ndarray:
    try:
        t0 = max((ex.evaluate(g, x0) for g in pr.constraints), default=0.0)
    except ex.DomainError:
        t0 = EPIGRAPH_BOUND
    return np.append(x0, min(max(t0, -EPIGRAPH_BOUND), EPIGRAPH_BOUND))


def _minimax_value(pr: Problem, x) -> float:
    try:
        return max(ex.evaluate(g, x) for g in pr.constraints)
    except ex.DomainError:
        return math.inf


def _sample_starts(pr: Problem, cfg: FeasConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    lo = np.where(np.isfinite(pr.lb), pr.lb,
                  np.where(np.isfinite(pr.ub), pr.ub - cfg.sample_width, -cfg.sample_width))
    hi = np.where(np.isfinite(pr.ub), pr.ub,
                  np.where(np.isfinite(pr.lb), pr.lb + cfg.sample_width, cfg.sample_width))
    return [lo + rng.random(pr.n) * (hi - lo) for _ in range(cfg.starts)]


def find_feasible(pr: Problem, cfg: FeasConfig | None = None) -> FeasResult:
    """Look for any feasible point of ``pr``; ``result.solution`` is ``None``
    when the budget runs out."""
    cfg = cfg or FeasConfig()
    start_time = time.perf_counter()
    deadline = math.inf if cfg.time_limit is None else start_time + cfg.time_limit
    template = build_feas_nlp(pr)

    def solve_start(x0) -> NlpResult:
        task = NlpTask(template.problem, _epigraph_start(pr, x0), config=cfg.nlp)
        return solve_local(task)

    starts = _sample_starts(pr, cfg)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(solve_start, starts))  # map keeps start order
    else:
        results = [solve_start(x0) for x0 in starts]

    minimax = []
    interior = []
    for idx, r in enumerate(results):
        t = _minimax_value(pr, r.x[: pr.n]) if pr.constraints else float(r.x[-1])
        minimax.append(t)
        if t <= cfg.slack_tol:
            interior.append((t, idx, r.x[: pr.n].copy()))
    interior.sort(key=lambda item: (item[0], item[1]))
    distinct = []
    for t, idx, x in interior:
        if all(np.max(np.abs(x - y), initial=0.0) > 1e-6 for _, _, y in distinct):
            distinct.append((t, idx, x))

    out = FeasResult(None, minimax)
    if not distinct:
        out.elapsed = time.perf_counter() - start_time
        return out
    try:
        rel = relax.build(pr)
    except relax.RelaxationError as err:
        log.warning("cannot build the linear relaxation: %s", err)
        out.elapsed = time.perf_counter() - start_time
        return out
    binaries = pr.binary_indices
    cuts = []
    for t, idx, x_prime in distinct:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            break
        milp = l1_objective(rel.to_lp(cuts), x_prime, rel.integers, rel.n)
        mres = solve_milp(milp, min(cfg.milp_time_limit, remaining), cfg.milp_node_limit)
        if not mres.has_point:
            out.attempts.append(FeasAttempt(idx, t, mres.status.value, None, None, False, math.inf))
            if mres.status is MilpStatus.INFEASIBLE:
                break  # the cuts emptied the relaxation
            continue
        x_dd = mres.x[: pr.n]
        nres = _restore(pr, x_dd, x_prime, cfg.nlp, cfg.int_tol)
        if nres is None:
            log.warning("start %d: fixed-integer NLP could not be evaluated", idx)
            out.attempts.append(FeasAttempt(idx, t, mres.status.value, x_dd.copy(), None,
                                            False, math.inf))
            continue
        feasible, _ = is_feasible(pr, nres.x, cfg.feas_tol, cfg.int_tol)
        out.attempts.append(FeasAttempt(idx, t, mres.status.value, x_dd.copy(), nres.x.copy(),
                                        feasible, _objective_or_inf(pr, nres.x)))
        if feasible:
            out.solution = Solution.from_point(pr, nres.x, cfg.int_tol)
            break
        if binaries:
            cuts.append(reverse_cut(nres.x, binaries, cfg.int_tol))
    out.elapsed = time.perf_counter() - start_time
    return out
