"""Local branching heuristics for nonconvex MINLPs, with the supporting
expression, relaxation, LP/MILP and local NLP layers."""

from .expr import Expr, Interval, evaluate, gradient, interval, parse, to_string
from .heur import (FeasConfig, LbConfig, Outcome, build_feas_nlp, compute_k, find_feasible,
                   improve, lb_constraint, reverse_cut)
from .model import (Problem, Solution, Variable, VarKind, fix_integers, is_feasible,
                    load_instance, normalize, relax_integrality)
from .relax import build as build_relaxation

__version__ = "0.1.0"

__all__ = [
    "Expr", "Interval", "evaluate", "gradient", "interval", "parse", "to_string",
    "FeasConfig", "LbConfig", "Outcome", "build_feas_nlp", "compute_k", "find_feasible",
    "improve", "lb_constraint", "reverse_cut",
    "Problem", "Solution", "Variable", "VarKind", "fix_integers", "is_feasible",
    "load_instance", "normalize", "relax_integrality", "build_relaxation",
]
