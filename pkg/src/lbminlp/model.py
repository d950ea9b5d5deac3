"""MINLP problems in the form ``min f(x) s.t. g_j(x) <= 0, lb <= x <= ub,
x_j integer for j in N_I``.

Also holds the instance/solution file formats (versioned JSON).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import DomainError, Expr, Interval

FEAS_TOL = 1e-6
INT_TOL = 1e-6

INSTANCE_FORMAT = "lbminlp-instance"
SOLUTION_FORMAT = "lbminlp-solution"
FORMAT_VERSION = 1


class ModelError(ValueError):
    """Invalid problem data; the message names the offending item."""


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = -math.inf
    ub: float = math.inf
    kind: VarKind = VarKind.CONTINUOUS

    def __post_init__(self):
        object.__setattr__(self, "kind", VarKind(self.kind))
        object.__setattr__(self, "lb", float(self.lb))
        object.__setattr__(self, "ub", float(self.ub))
        if not self.lb <= self.ub:
            raise ModelError(f"variable {self.name!r}: lb {self.lb} > ub {self.ub}")
        if self.kind is VarKind.BINARY and (self.lb < 0.0 or self.ub > 1.0):
            raise ModelError(f"variable {self.name!r}: binary bounds must lie in [0, 1]")

    @property
    def is_integer(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


def normalize(expression: Expr, relation, rhs: float) -> list[Expr]:
    """Rewrite ``expression <relation> rhs`` as a list of ``g(x) <= 0`` forms."""
    relation = Relation(relation)
    rhs_e = ex.const(rhs)
    if relation is Relation.LE:
        return [expression - rhs_e]
    if relation is Relation.GE:
        return [rhs_e - expression]
    return [expression - rhs_e, rhs_e - expression]


@dataclass(frozen=True)
class Problem:
    """Minimize ``objective`` subject to ``constraints[j] <= 0`` and bounds.

    Construction validates that variable indices are in range and that
    every variable used nonlinearly has finite bounds.
    """

    variables: tuple[Variable, ...]
    objective: Expr
    constraints: tuple[Expr, ...] = ()
    constraint_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = tuple(self.constraint_names) or tuple(f"c{j}" for j in range(len(self.constraints)))
        if len(names) != len(self.constraints):
            raise ModelError("constraint_names must match constraints")
        object.__setattr__(self, "constraint_names", names)
        n = len(self.variables)
        for label, e in [("objective", self.objective)] + list(zip(names, self.constraints)):
            bad = [i for i in ex.variables(e) if i >= n]
            if bad:
                raise ModelError(f"{label}: variable x{bad[0]} out of range (n = {n})")
            for i in sorted(ex.nonlinear_variables(e)):
                v = self.variables[i]
                if math.isinf(v.lb) or math.isinf(v.ub):
                    raise ModelError(
                        f"variable {v.name!r} appears nonlinearly in {label} but is unbounded")

    @property
    def n(self) -> int:
        return len(self.variables)

    @cached_property
    def lb(self) -> np.ndarray:
        return np.array([v.lb for v in self.variables])

    @cached_property
    def ub(self) -> np.ndarray:
        return np.array([v.ub for v in self.variables])

    @cached_property
    def integer_indices(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.variables) if v.is_integer)

    @cached_property
    def binary_indices(self) -> tuple[int, ...]:
        return tuple(i for i in self.integer_indices
                     if self.variables[i].lb >= 0.0 and self.variables[i].ub <= 1.0)

    def box(self) -> list[Interval]:
        return [Interval(v.lb, v.ub) for v in self.variables]

    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def objective_value(self, point) -> float:
        return ex.evaluate(self.objective, point)

    def with_constraints(self, extra: Sequence[Expr], names: Sequence[str] = ()) -> Problem:
        names = list(names) or [f"extra{j}" for j in range(len(extra))]
        return replace(self, constraints=self.constraints + tuple(extra),
                       constraint_names=self.constraint_names + tuple(names))


@dataclass
class Solution:
    point: np.ndarray
    objective: float
    max_violation: float
    integral: bool

    @classmethod
    def from_point(cls, pr: Problem, point, int_tol: float = INT_TOL) -> Solution:
        point = np.asarray(point, dtype=float)
        report = check_point(pr, point, int_tol=int_tol)
        return cls(point, report.objective, report.max_violation, report.integral)


@dataclass
class PointReport:
    """Everything :func:`is_feasible` looks at, itemized (used by ``check``)."""

    objective: float
    constraint_values: list[float]
    bound_violations: list[float]
    fractionality: dict[int, float]
    max_violation: float
    integral: bool
    domain_error: str | None = None
    worst: str | None = None


def check_point(pr: Problem, point, int_tol: float = INT_TOL) -> PointReport:
    point = np.asarray(point, dtype=float)
    if point.shape != (pr.n,):
        raise ModelError(f"point has {point.size} entries, problem has {pr.n} variables")
    domain_error = None
    try:
        objective = pr.objective_value(point)
    except DomainError as err:
        objective = math.inf
        domain_error = f"objective: {err}"
    values = []
    worst, max_viol = None, 0.0
    for name, g in zip(pr.constraint_names, pr.constraints):
        try:
            gv = ex.evaluate(g, point)
        except DomainError as err:
            gv = math.inf
            domain_error = domain_error or f"{name}: {err}"
        values.append(gv)
        if gv > max_viol:
            max_viol, worst = gv, f"constraint {name}"
    bound_viol = []
    for v, x in zip(pr.variables, point):
        b = max(v.lb - x, x - v.ub, 0.0)
        bound_viol.append(b)
        if b > max_viol:
            max_viol, worst = b, f"bound of variable {v.name}"
    frac = {i: abs(point[i] - round(point[i])) for i in pr.integer_indices}
    integral = all(f <= int_tol for f in frac.values())
    return PointReport(objective, values, bound_viol, frac, max_viol, integral, domain_error, worst)


def is_feasible(pr: Problem, point, tol: float = FEAS_TOL,
                int_tol: float = INT_TOL) -> tuple[bool, float]:
    """Return ``(feasible, max_violation)``.

    ``max_violation`` is the largest constraint or bound excess, reported as
    0 for a feasible point and ``inf`` when evaluation fails.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = check_point(pr, point, int_tol=int_tol)
    if r.domain_error is not None:
        return False, math.inf
    ok = r.max_violation <= tol and r.integral
    return ok, (0.0 if ok else r.max_violation)


def relax_integrality(pr: Problem) -> Problem:
    if not pr.integer_indices:
        return pr
    variables = tuple(replace(v, kind=VarKind.CONTINUOUS) for v in pr.variables)
    return replace(pr, variables=variables)


def fix_integers(pr: Problem, point, int_tol: float = INT_TOL) -> Problem:
    """Collapse the bounds of every integer variable to its rounded value."""
    if not pr.integer_indices:
        return pr
    variables = list(pr.variables)
    for i in pr.integer_indices:
        r = round(float(point[i]))
        if abs(point[i] - r) > int_tol:
            raise ModelError(f"variable {variables[i].name!r} is fractional ({point[i]!r})")
        variables[i] = replace(variables[i], lb=float(r), ub=float(r))
    return replace(pr, variables=tuple(variables))


# -- files ------------------------------------------------------------------

def _bound_to_json(v: float):
    return None if math.isinf(v) else v


def _bound_from_json(v, default: float) -> float:
    return default if v is None else float(v)


@dataclass
class RawConstraint:
    expression: Expr
    relation: Relation
    rhs: float
    name: str = ""


@dataclass
class Instance:
    """An instance file as written: constraints keep their original relation.

    :attr:`problem` gives the normalized ``<= 0`` form.  Equality
    constraints become two rows named ``<name>`` and ``<name>:ge``.
    """

    variables: list[Variable]
    objective: Expr
    constraints: list[RawConstraint] = field(default_factory=list)
    name: str = ""

    @cached_property
    def problem(self) -> Problem:
        rows, names = [], []
        for j, c in enumerate(self.constraints):
            label = c.name or f"c{j}"
            forms = normalize(c.expression, c.relation, c.rhs)
            rows.extend(forms)
            names.extend([label] if len(forms) == 1 else [label, f"{label}:ge"])
        return Problem(tuple(self.variables), self.objective, tuple(rows), tuple(names))

    def to_dict(self) -> dict:
        return {
            "format": INSTANCE_FORMAT,
            "version": FORMAT_VERSION,
            "name": self.name,
            "variables": [
                {"name": v.name, "lb": _bound_to_json(v.lb), "ub": _bound_to_json(v.ub),
                 "kind": v.kind.value}
                for v in self.variables
            ],
            "objective": ex.to_string(self.objective),
            "constraints": [
                {"name": c.name, "expr": ex.to_string(c.expression),
                 "relation": c.relation.value, "rhs": c.rhs}
                for c in self.constraints
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Instance:
        if data.get("format") != INSTANCE_FORMAT:
            raise ModelError(f"not an instance file (format = {data.get('format')!r})")
        if data.get("version") != FORMAT_VERSION:
            raise ModelError(f"unsupported instance version {data.get('version')!r}")
        variables = []
        for k, v in enumerate(data["variables"]):
            name = v.get("name", f"x{k}")
            try:
                variables.append(Variable(name, _bound_from_json(v.get("lb"), -math.inf),
                                          _bound_from_json(v.get("ub"), math.inf),
                                          VarKind(v.get("kind", "continuous"))))
            except ValueError as err:
                raise ModelError(f"variable {name!r}: {err}") from err
        try:
            objective = ex.parse(data["objective"])
        except ex.ExpressionError as err:
            raise ModelError(f"objective: {err}") from err
        constraints = []
        for j, c in enumerate(data.get("constraints", [])):
            name = c.get("name") or f"c{j}"
            try:
                constraints.append(RawConstraint(ex.parse(c["expr"]), Relation(c["relation"]),
                                                 float(c["rhs"]), name))
            except (ex.ExpressionError, ValueError, KeyError) as err:
                raise ModelError(f"constraint {name!r}: {err}") from err
        inst = cls(variables, objective, constraints, data.get("name", ""))
        inst.problem  # validates bounds of nonlinear variables
        return inst


def load_instance(path) -> Instance:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelError(f"{path}: {err}") from err
    return Instance.from_dict(data)


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh, indent=2)
        fh.write("\n")


def solution_to_dict(pr: Problem, sol: Solution, tol: float = FEAS_TOL) -> dict:
    feasible, _ = is_feasible(pr, sol.point, tol)
    return {
        "format": SOLUTION_FORMAT,
        "version": FORMAT_VERSION,
        "values": {v.name: float(x) for v, x in zip(pr.variables, sol.point)},
        "objective": sol.objective,
        "max_violation": sol.max_violation,
        "feasible": feasible,
    }


def save_solution(pr: Problem, sol: Solution, path, tol: float = FEAS_TOL) -> None:
    with open(path, "w") as fh:
        json.dump(solution_to_dict(pr, sol, tol), fh, indent=2)
        fh.write("\n")


def load_point(pr: Problem, path) -> np.ndarray:
    """Read the ``values`` of a solution file into a point for ``pr``."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelError(f"{path}: {err}") from err
    if data.get("format") != SOLUTION_FORMAT:
        raise ModelError(f"not a solution file (format = {data.get('format')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise ModelError(f"unsupported solution version {data.get('version')!r}")
    values = data["values"]
    missing = [v.name for v in pr.variables if v.name not in values]
    if missing:
        raise ModelError(f"solution file lacks a value for variable {missing[0]!r}")
    return np.array([float(values[v.name]) for v in pr.variables])
