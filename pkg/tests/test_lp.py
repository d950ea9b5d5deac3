import math

import numpy as np
import pytest

from lbminlp.lp import LpProblem, LpStatus, solve_lp

from oracles import highs, lp_vertices

INF = math.inf


def test_simple_bound_example():
    res = solve_lp(LpProblem([-1.0], [0.0], [10.0], [({0: 1.0}, "<=", 1.0)]))
    assert res.status is LpStatus.OPTIMAL
    assert res.x.tolist() == [1.0] and res.objective == -1.0


def test_contradictory_rows_infeasible():
    lp = LpProblem([0.0], [-INF], [INF], [({0: 1.0}, ">=", 2.0), ({0: 1.0}, "<=", 1.0)])
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_crossed_bounds_infeasible():
    assert solve_lp(LpProblem([0.0], [1.0], [0.0])).status is LpStatus.INFEASIBLE


def test_unbounded():
    lp = LpProblem([-1.0, 0.0], [0.0, 0.0], [INF, 1.0], [({0: 1.0, 1: -1.0}, ">=", 0.0)])
    assert solve_lp(lp).status is LpStatus.UNBOUNDED


def test_free_variables_and_equalities():
    # min x + y  s.t.  x - y = 1, x + y >= -3, both free
    lp = LpProblem([1.0, 1.0], [-INF, -INF], [INF, INF],
                   [({0: 1.0, 1: -1.0}, "=", 1.0), ({0: 1.0, 1: 1.0}, ">=", -3.0)])
    res = solve_lp(lp)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-3.0)
    assert res.x == pytest.approx([-1.0, -2.0])


def test_no_rows():
    res = solve_lp(LpProblem([1.0, -2.0], [-1.0, 0.0], [3.0, 4.0]))
    assert res.x.tolist() == [-1.0, 4.0] and res.objective == -9.0


def test_beale_cycling_instance_terminates():
    # classic example that cycles under textbook Dantzig pricing
    c = [-0.75, 20.0, -0.5, 6.0]
    rows = [({0: 0.25, 1: -8.0, 2: -1.0, 3: 9.0}, "<=", 0.0),
            ({0: 0.5, 1: -12.0, 2: -0.5, 3: 3.0}, "<=", 0.0),
            ({2: 1.0}, "<=", 1.0)]
    res = solve_lp(LpProblem(c, [0.0] * 4, [INF] * 4, rows), iteration_limit=200)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-1.25)


def test_iteration_limit_reported():
    rng = np.random.default_rng(0)
    lp = random_lp(rng, 8, 8)
    res = solve_lp(lp, iteration_limit=1)
    assert res.status in (LpStatus.ITERATION_LIMIT, LpStatus.OPTIMAL)
    if res.status is LpStatus.ITERATION_LIMIT:
        assert res.iterations <= 1


def random_lp(rng, n, m, box=5.0):
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-box / 2, box / 2, n)
    b = A @ x0 + rng.uniform(0, 2, m)
    rows = [({j: A[i, j] for j in range(n)}, "<=", b[i]) for i in range(m)]
    return LpProblem(c, np.full(n, -box), np.full(n, box), rows)


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(200):
        lp = random_lp(rng, 4, 4)
        A, _, b = lp.dense()
        ref, _ = lp_vertices(lp.c, A, b, lp.lb, lp.ub)
        res = solve_lp(lp)
        assert res.status is LpStatus.OPTIMAL
        assert res.objective == pytest.approx(ref, abs=1e-7)
        assert lp.max_violation(res.x) <= 1e-7


def test_random_mixed_lps_match_highs():
    rng = np.random.default_rng(2)
    statuses = set()
    for _ in range(300):
        n, m = rng.integers(1, 7), rng.integers(0, 7)
        c = rng.integers(-3, 4, n).astype(float)
        lb = np.where(rng.random(n) < 0.2, -INF, rng.integers(-3, 1, n))
        ub = np.where(rng.random(n) < 0.2, INF, rng.integers(0, 4, n))
        rows = []
        for _ in range(m):
            coefs = {j: float(rng.integers(-3, 4)) for j in range(n) if rng.random() < 0.7}
            rows.append((coefs, str(rng.choice(["<=", ">=", "="])), float(rng.integers(-4, 5))))
        lp = LpProblem(c, lb, ub, rows)
        ref_status, ref = highs(lp)
        res = solve_lp(lp)
        statuses.add(ref_status)
        assert res.status.value == ref_status
        if ref_status == "optimal":
            assert res.objective == pytest.approx(ref, abs=1e-7)
            assert lp.max_violation(res.x) <= 1e-7
    assert statuses == {"optimal", "infeasible", "unbounded"}


def test_degenerate_lps_match_highs():
    # many rows through the same vertex
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = 3
        A = rng.integers(-2, 3, (8, n)).astype(float)
        rows = [({j: A[i, j] for j in range(n)}, "<=", 0.0) for i in range(8)]
        lp = LpProblem(rng.integers(-2, 3, n).astype(float), [-1.0] * n, [1.0] * n, rows)
        ref_status, ref = highs(lp)
        res = solve_lp(lp)
        assert res.status.value == ref_status == "optimal"
        assert res.objective == pytest.approx(ref, abs=1e-7)


def test_deterministic():
    lp = random_lp(np.random.default_rng(4), 6, 5)
    a, b = solve_lp(lp), solve_lp(lp.copy())
    assert a.iterations == b.iterations and a.x.tolist() == b.x.tolist()
