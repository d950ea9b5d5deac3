r"""
Local branching on a toy problem
================================

T1 has two binaries and one continuous variable::

    min  -x - 2 y0 - 3 y1
    s.t. x^2 <= 4 + 4 y0,   x y1 <= 2,   x in [0, 4]

Starting from the feasible point ``y = (0, 0), x = 2`` (objective -2) we
walk through one round of the improvement heuristic by hand and then call
:func:`lbminlp.improve`.
"""

import itertools

import numpy as np

from lbminlp import LbConfig, build_relaxation, compute_k, improve, lb_constraint
from lbminlp.heur import row_expression
from lbminlp.instances import t1
from lbminlp.milp import l1_objective, solve_milp
from lbminlp.model import fix_integers, relax_integrality
from lbminlp.nlp import NlpTask, solve_local

inst, x_bar = t1()
pr = inst.problem
print("incumbent", x_bar, "objective", pr.objective_value(x_bar))

###############################################################################
# With two binaries the neighbourhood size is ``k = 1``: only one binary may
# flip, so the pattern (1, 1) is out of reach.

k = compute_k(len(pr.binary_indices))
row = lb_constraint(x_bar, pr.binary_indices, k)
print("k =", k, " local branching row:", row)

###############################################################################
# Step 1: solve the continuous relaxation with the row added, warm-started
# at the incumbent.  The result ``x'`` is usually fractional.

q_bar = relax_integrality(pr).with_constraints([row_expression(row)], ["local_branching"])
x_prime = solve_local(NlpTask(q_bar, x_bar)).x
print("x'  =", np.round(x_prime, 4))

###############################################################################
# Step 2: the integral point of the linear relaxation nearest to ``x'``.

rel = build_relaxation(pr)
print(rel.dump())
milp = l1_objective(rel.to_lp([row]), x_prime, rel.integers, rel.n)
x_dd = solve_milp(milp).x[: pr.n]
print("x'' =", np.round(x_dd, 4))

###############################################################################
# Step 3: fix the binaries of ``x''`` and polish the continuous part.

x_star = solve_local(NlpTask(fix_integers(pr, x_dd), x_dd)).x
print("x*  =", np.round(x_star, 4), "objective", pr.objective_value(x_star))

###############################################################################
# The same thing in one call.  With the default ``k`` the answer is the best
# point of the neighbourhood; ``k = 2`` reaches the global optimum -7.

for k in (None, 2):
    trace = improve(pr, x_bar, LbConfig(k=k))
    print(f"k={trace.k}: {trace.outcome.value} after {trace.iterations} iteration(s),",
          "objective", round(trace.solution.objective, 6))

# brute force over the four patterns for comparison
for y in itertools.product((0, 1), repeat=2):
    cap = min(4.0, np.sqrt(4 + 4 * y[0]), 2.0 if y[1] else 4.0)
    print("pattern", y, "best objective", -cap - 2 * y[0] - 3 * y[1])
