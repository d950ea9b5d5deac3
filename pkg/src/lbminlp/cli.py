"""Command-line front end.

    lbminlp improve  INSTANCE INCUMBENT [-o OUT] [--k K|auto] [--max-iter N] ...
    lbminlp feasible INSTANCE [-o OUT] [--seed S] [--starts H] ...
    lbminlp check    INSTANCE POINT [--dump-relaxation PATH]

Exit codes:

    0  improved (improve) / feasible point found (feasible) / point feasible (check)
    1  no improvement / nothing found / point infeasible
    2  input error (unreadable files, invalid flags, infeasible incumbent)
    3  solver failure
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass

from . import relax
from .heur import (FeasConfig, LbConfig, LocalBranchingError, Outcome, find_feasible,
                   improve, write_trace)
from .model import (FEAS_TOL, INT_TOL, ModelError, Solution, check_point, load_instance,
                    load_point, save_solution, solution_to_dict)

EXIT_OK = 0
EXIT_NO_RESULT = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

log = logging.getLogger("lbminlp")


@dataclass
class RunReport:
    command: str
    instance: str
    wall_time: float
    outcome: str
    initial_objective: float | None
    final_objective: float | None
    iterations: int


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _k_value(text):
    if text == "auto":
        return None
    return _positive_int(text)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lbminlp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("instance")
        sp.add_argument("-o", "--output", help="solution file (default: stdout)")
        sp.add_argument("--milp-time", type=_positive_float, default=2.0)
        sp.add_argument("--time-limit", type=_positive_float, default=None)
        sp.add_argument("--tol-feas", type=_positive_float, default=FEAS_TOL)
        sp.add_argument("--tol-int", type=_positive_float, default=INT_TOL)
        sp.add_argument("--trace", help="write per-iteration JSON lines here")
        sp.add_argument("--trace-timing", action="store_true",
                        help="include wall-clock times in the trace (not byte-reproducible)")
        sp.add_argument("--dump-relaxation", metavar="PATH",
                        help="write the linear relaxation as a text table")
        sp.add_argument("-v", "--verbose", action="store_true")

    imp = sub.add_parser("improve", help="local branching from a feasible incumbent")
    common(imp)
    imp.add_argument("incumbent")
    imp.add_argument("--k", type=_k_value, default=None, help="integer or 'auto'")
    imp.add_argument("--max-iter", type=_positive_int, default=10)
    imp.add_argument("--force", action="store_true",
                     help="run even if the incumbent is infeasible")

    fea = sub.add_parser("feasible", help="search for a first feasible point")
    common(fea)
    fea.add_argument("--seed", type=int, default=0)
    fea.add_argument("--starts", type=_positive_int, default=10)

    chk = sub.add_parser("check", help="report objective and violations of a point")
    chk.add_argument("instance")
    chk.add_argument("point")
    chk.add_argument("--tol-feas", type=_positive_float, default=FEAS_TOL)
    chk.add_argument("--tol-int", type=_positive_float, default=INT_TOL)
    chk.add_argument("--dump-relaxation", metavar="PATH")
    return p


def _write_solution(pr, sol: Solution, path, tol):
    if path:
        save_solution(pr, sol, path, tol)
    else:
        sys.stdout.write(json.dumps(solution_to_dict(pr, sol, tol), indent=2) + "\n")


def _dump_relaxation(pr, path):
    with open(path, "w") as fh:
        fh.write(relax.build(pr).dump())


def _report(rep: RunReport):
    print(json.dumps(asdict(rep)), file=sys.stderr)


def _clean(v):
    return v if v is not None and math.isfinite(v) else None


def cmd_improve(args) -> int:
    t0 = time.perf_counter()
    try:
        inst = load_instance(args.instance)
        pr = inst.problem
        x_bar = load_point(pr, args.incumbent)
    except (OSError, ModelError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    rep = check_point(pr, x_bar, args.tol_int)
    if rep.domain_error or rep.max_violation > args.tol_feas or not rep.integral:
        if rep.domain_error:
            what = rep.domain_error
        elif rep.max_violation > args.tol_feas:
            what = f"{rep.worst} violated by {rep.max_violation:g}"
        else:
            j = max(rep.fractionality, key=rep.fractionality.get)
            what = f"integer variable {pr.variables[j].name} is fractional"
        if not args.force:
            print(f"error: incumbent infeasible: {what}", file=sys.stderr)
            return EXIT_INPUT
        print(f"warning: incumbent infeasible: {what}", file=sys.stderr)
    if args.dump_relaxation:
        _dump_relaxation(pr, args.dump_relaxation)
    cfg = LbConfig(k=args.k, max_iterations=args.max_iter, milp_time_limit=args.milp_time,
                   time_limit=args.time_limit, feas_tol=args.tol_feas, int_tol=args.tol_int,
                   check_incumbent=not args.force)
    try:
        trace = improve(pr, x_bar, cfg)
    except (LocalBranchingError, relax.RelaxationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.trace:
        write_trace([r.to_dict(args.trace_timing) for r in trace.records],
                    trace.summary(args.trace_timing), args.trace)
    final = trace.solution.objective if trace.solution else trace.incumbent_objective
    _report(RunReport("improve", args.instance, time.perf_counter() - t0, trace.outcome.value,
                      _clean(trace.incumbent_objective), _clean(final), trace.iterations))
    if trace.outcome is Outcome.IMPROVED:
        _write_solution(pr, trace.solution, args.output, args.tol_feas)
        return EXIT_OK
    if trace.outcome is Outcome.SOLVER_FAILURE:
        return EXIT_SOLVER
    return EXIT_NO_RESULT


def cmd_feasible(args) -> int:
    t0 = time.perf_counter()
    try:
        pr = load_instance(args.instance).problem
    except (OSError, ModelError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.dump_relaxation:
        _dump_relaxation(pr, args.dump_relaxation)
    cfg = FeasConfig(starts=args.starts, seed=args.seed, milp_time_limit=args.milp_time,
                     time_limit=args.time_limit, feas_tol=args.tol_feas, int_tol=args.tol_int)
    res = find_feasible(pr, cfg)
    if args.trace:
        summary = {"outcome": "feasible" if res.found else "none",
                   "minimax": [_clean(t) for t in res.minimax],
                   "objective": _clean(res.solution.objective) if res.found else None}
        if args.trace_timing:
            summary["time"] = round(res.elapsed, 6)
        write_trace([a.to_dict() for a in res.attempts], summary, args.trace)
    _report(RunReport("feasible", args.instance, time.perf_counter() - t0,
                      "feasible" if res.found else "none", None,
                      _clean(res.solution.objective) if res.found else None, len(res.attempts)))
    if res.found:
        _write_solution(pr, res.solution, args.output, args.tol_feas)
        return EXIT_OK
    return EXIT_NO_RESULT


def cmd_check(args) -> int:
    try:
        pr = load_instance(args.instance).problem
        x = load_point(pr, args.point)
    except (OSError, ModelError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.dump_relaxation:
        _dump_relaxation(pr, args.dump_relaxation)
    rep = check_point(pr, x, args.tol_int)
    print(f"objective {float(rep.objective)!r}")
    for name, g in zip(pr.constraint_names, rep.constraint_values):
        flag = "VIOLATED" if g > args.tol_feas else "ok"
        print(f"constraint {name}: g = {float(g)!r} {flag}")
    for v, b in zip(pr.variables, rep.bound_violations):
        if b > args.tol_feas:
            print(f"bound {v.name}: violated by {float(b)!r}")
    for j, frac in rep.fractionality.items():
        flag = "ok" if frac <= args.tol_int else "FRACTIONAL"
        print(f"integer {pr.variables[j].name}: {float(x[j])!r} {flag}")
    if rep.domain_error:
        print(f"evaluation failed: {rep.domain_error}")
    feasible = rep.domain_error is None and rep.max_violation <= args.tol_feas and rep.integral
    print(f"max violation {float(rep.max_violation)!r}")
    print("feasible" if feasible else "infeasible")
    return EXIT_OK if feasible else EXIT_NO_RESULT


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "verbose", False):
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    handler = {"improve": cmd_improve, "feasible": cmd_feasible, "check": cmd_check}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
