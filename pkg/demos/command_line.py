r"""
Instance files and the command line
===================================

Writes T1 and its incumbent as JSON, then runs the ``lbminlp`` commands on
them.  The same files can be used from a shell::

    lbminlp check    t1.json t1_incumbent.json
    lbminlp improve  t1.json t1_incumbent.json -o better.json --trace trace.jsonl
    lbminlp feasible t1.json --seed 1
"""

import json
import tempfile
from pathlib import Path

from lbminlp.cli import main
from lbminlp.instances import t1
from lbminlp.model import Solution, save_instance, save_solution

work = Path(tempfile.mkdtemp())
inst, x_bar = t1()
save_instance(inst, work / "t1.json")
save_solution(inst.problem, Solution.from_point(inst.problem, x_bar), work / "t1_incumbent.json")
print((work / "t1.json").read_text())

code = main(["check", str(work / "t1.json"), str(work / "t1_incumbent.json")])
print("check exit code", code)

code = main(["improve", str(work / "t1.json"), str(work / "t1_incumbent.json"),
             "-o", str(work / "better.json"), "--trace", str(work / "trace.jsonl")])
print("improve exit code", code)
print(json.loads((work / "better.json").read_text())["values"])
print((work / "trace.jsonl").read_text())
