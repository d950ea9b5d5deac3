r"""
Finding a first feasible point
==============================

:func:`lbminlp.find_feasible` minimizes the largest constraint value from
several random starts, keeps the minima that sit inside every constraint,
and rounds them to integral points through the same distance MILP used by
the improvement heuristic.
"""

import numpy as np

from lbminlp import FeasConfig, find_feasible, is_feasible
from lbminlp.instances import random_infeasible, random_interior, t1

###############################################################################
# T1 has feasible points for every binary pattern.

pr = t1()[0].problem
res = find_feasible(pr, FeasConfig(seed=1))
print("T1:", res.solution.point, "objective", res.solution.objective)
print("minimax values per start:", np.round(res.minimax, 3))

###############################################################################
# An instance built around a strictly feasible integral point.

pr = random_interior(2).problem
res = find_feasible(pr, FeasConfig(seed=0))
print("interior-2 feasible:", is_feasible(pr, res.solution.point)[0],
      "after", len(res.attempts), "MILP/NLP attempt(s)")

###############################################################################
# With contradictory constraints every start ends with a positive minimax
# value, which is the certificate-like signal that nothing was found.

pr = random_infeasible(0).problem
res = find_feasible(pr, FeasConfig(seed=0, starts=5))
print("infeasible-0 found:", res.found, " min over starts of max_j g_j:",
      round(min(res.minimax), 4))
