import json
import subprocess
import sys

import numpy as np
import pytest

from lbminlp import expr as ex
from lbminlp.cli import main
from lbminlp.instances import random_infeasible, t1
from lbminlp.model import (Instance, RawConstraint, Relation, Solution, Variable, is_feasible,
                           load_point, save_instance, save_solution)

from oracles import brute_force, neighbourhood


@pytest.fixture
def t1_files(tmp_path):
    inst, x_bar = t1()
    ipath, spath = tmp_path / "t1.json", tmp_path / "incumbent.json"
    save_instance(inst, ipath)
    save_solution(inst.problem, Solution.from_point(inst.problem, x_bar), spath)
    return inst, str(ipath), str(spath)


def point_file(tmp_path, pr, point, name="p.json"):
    path = tmp_path / name
    save_solution(pr, Solution.from_point(pr, np.asarray(point, dtype=float)), path)
    return str(path)


def run_report(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_improve_t1(t1_files, tmp_path, capsys):
    inst, ipath, spath = t1_files
    out = tmp_path / "out.json"
    assert main(["improve", ipath, spath, "-o", str(out)]) == 0
    pr = inst.problem
    x = load_point(pr, out)
    nb, _ = brute_force(pr, neighbourhood((0, 0), 1))
    assert pr.objective_value(x) == pytest.approx(nb, abs=1e-5)
    rep = run_report(capsys)
    assert rep["outcome"] == "improved" and rep["initial_objective"] == -2.0
    assert rep["final_objective"] <= rep["initial_objective"]


def test_improve_t1_k2_global_optimum(t1_files, tmp_path):
    inst, ipath, spath = t1_files
    out = tmp_path / "out.json"
    assert main(["improve", ipath, spath, "--k", "2", "-o", str(out)]) == 0
    best, _ = brute_force(inst.problem)
    assert json.loads(out.read_text())["objective"] == pytest.approx(best, abs=1e-5)


def test_improve_writes_stdout_when_no_output(t1_files, capsys):
    _, ipath, spath = t1_files
    assert main(["improve", ipath, spath]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["format"] == "lbminlp-solution" and data["feasible"] is True


def test_infeasible_incumbent_names_constraint(t1_files, tmp_path, capsys):
    inst, ipath, _ = t1_files
    # x*y1 = 2.5 exceeds its cap of 2 by 0.5
    bad = point_file(tmp_path, inst.problem, [1.0, 1.0, 2.5])
    assert main(["improve", ipath, bad]) == 2
    err = capsys.readouterr().err
    assert "bilinear_cap" in err and "0.5" in err


def test_force_runs_anyway(t1_files, tmp_path, capsys):
    inst, ipath, _ = t1_files
    bad = point_file(tmp_path, inst.problem, [1.0, 1.0, 2.5])
    code = main(["improve", ipath, bad, "--force"])
    assert code in (0, 1)
    assert "warning" in capsys.readouterr().err


@pytest.mark.parametrize("flags", [["--max-iter", "0"], ["--k", "0"], ["--k", "x"],
                                   ["--milp-time", "-1"]])
def test_rejected_flags(t1_files, flags, capsys):
    _, ipath, spath = t1_files
    assert main(["improve", ipath, spath] + flags) == 2


def test_missing_and_malformed_files(t1_files, tmp_path, capsys):
    _, ipath, spath = t1_files
    assert main(["improve", str(tmp_path / "nope.json"), spath]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["improve", ipath, str(broken)]) == 2
    assert main(["feasible", str(broken)]) == 2


def test_no_improvement_exit_code(tmp_path, capsys):
    # a single binary whose flip only costs more
    inst = Instance([Variable("y", 0, 1, "binary"), Variable("x", 0, 1)],
                    ex.parse("(+ x0 (^ x1 2))"),
                    [RawConstraint(ex.parse("(* x0 x1)"), Relation.LE, 1.0, "c")])
    ipath = tmp_path / "i.json"
    save_instance(inst, ipath)
    spath = point_file(tmp_path, inst.problem, [0.0, 0.0])
    assert main(["improve", str(ipath), spath, "--max-iter", "5"]) == 1
    assert run_report(capsys)["outcome"] == "exhausted"


def test_feasible_t1(t1_files, tmp_path, capsys):
    inst, ipath, _ = t1_files
    out = tmp_path / "f.json"
    assert main(["feasible", ipath, "--seed", "1", "-o", str(out)]) == 0
    assert is_feasible(inst.problem, load_point(inst.problem, out), 1e-6)[0]


def test_feasible_contradictory(tmp_path, capsys):
    ipath = tmp_path / "inf.json"
    save_instance(random_infeasible(0), ipath)
    assert main(["feasible", str(ipath), "--starts", "3"]) == 1


def test_byte_identical_outputs(t1_files, tmp_path, capsys):
    _, ipath, spath = t1_files
    files = []
    for run in range(2):
        out, trace = tmp_path / f"s{run}.json", tmp_path / f"t{run}.jsonl"
        assert main(["improve", ipath, spath, "-o", str(out), "--trace", str(trace)]) == 0
        fout, ftrace = tmp_path / f"fs{run}.json", tmp_path / f"ft{run}.jsonl"
        assert main(["feasible", ipath, "--seed", "3", "-o", str(fout),
                     "--trace", str(ftrace)]) == 0
        files.append([p.read_bytes() for p in (out, trace, fout, ftrace)])
    assert files[0] == files[1]


def test_trace_contents(t1_files, tmp_path, capsys):
    _, ipath, spath = t1_files
    trace = tmp_path / "t.jsonl"
    main(["improve", ipath, spath, "--trace", str(trace), "-o", str(tmp_path / "o.json")])
    lines = [json.loads(line) for line in trace.read_text().splitlines()]
    assert lines[-1]["summary"]["outcome"] == "improved"
    assert lines[-1]["summary"]["improvement_iteration"] == lines[-2]["iteration"]
    assert "time" not in lines[0]
    main(["improve", ipath, spath, "--trace", str(trace), "--trace-timing",
          "-o", str(tmp_path / "o.json")])
    lines = [json.loads(line) for line in trace.read_text().splitlines()]
    assert "time" in lines[0] and "time" in lines[-1]["summary"]


def test_dump_relaxation(t1_files, tmp_path, capsys):
    _, ipath, spath = t1_files
    dump = tmp_path / "rel.txt"
    assert main(["check", ipath, spath, "--dump-relaxation", str(dump)]) == 0
    assert "eta" in dump.read_text() and "bilinear" in dump.read_text()


@pytest.mark.parametrize("x, code, word", [(2.0, 0, "feasible"), (3.0, 1, "VIOLATED")])
def test_check_constraint_cases(tmp_path, capsys, x, code, word):
    inst = Instance([Variable("x", -10, 10)], ex.const(0.0),
                    [RawConstraint(ex.parse("(^ x0 2)"), Relation.LE, 4.0, "square")])
    ipath = tmp_path / "i.json"
    save_instance(inst, ipath)
    p = point_file(tmp_path, inst.problem, [x])
    assert main(["check", str(ipath), p]) == code
    assert word in capsys.readouterr().out


def test_check_fractional_integer(t1_files, tmp_path, capsys):
    inst, ipath, _ = t1_files
    p = point_file(tmp_path, inst.problem, [0.4, 0.0, 1.0])
    assert main(["check", ipath, p]) == 1
    out = capsys.readouterr().out
    assert "integer y0: 0.4 FRACTIONAL" in out and out.strip().endswith("infeasible")


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "lbminlp", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "improve" in res.stdout
