import numpy as np
import pytest

from lbminlp import expr as ex
from lbminlp.instances import random_interior, random_nonconvex
from lbminlp.model import Problem, Variable, is_feasible, relax_integrality
from lbminlp.nlp import (NlpStatus, NlpTask, augmented_lagrangian, projected_gradient_norm,
                         solve_local)

from helpers import five_point_gradient, relative_error

X = ex.var(0)


def one_var(obj, cons=(), lo=-10.0, hi=10.0):
    return Problem((Variable("x", lo, hi),), obj, tuple(cons))


def test_unconstrained_quadratic():
    res = solve_local(NlpTask(one_var(ex.power(X - 3, 2)), np.array([0.0])))
    assert res.status is NlpStatus.LOCALLY_OPTIMAL
    assert res.x[0] == pytest.approx(3.0, abs=1e-5)
    assert res.objective == pytest.approx(0.0, abs=1e-5)


def test_constrained_linear():
    res = solve_local(NlpTask(one_var(X, [ex.power(X, 2) - 4]), np.array([0.0])))
    assert res.ok
    assert res.x[0] == pytest.approx(-2.0, abs=1e-5)
    assert res.max_violation <= 1e-6


@pytest.mark.parametrize("start, expected", [(-0.9, -1.0), (0.9, 1.0)])
def test_double_well_basins(start, expected):
    f = ex.power(ex.power(X, 2) - 1, 2)
    # stationary points by dense grid: the sign changes of f'
    grid = np.linspace(-10, 10, 200001)
    d = 4 * grid ** 3 - 4 * grid
    roots = grid[:-1][np.sign(d[:-1]) != np.sign(d[1:])]
    nearest = roots[np.argmin(np.abs(roots - expected))]
    res = solve_local(NlpTask(one_var(f), np.array([start])))
    assert res.x[0] == pytest.approx(nearest, abs=1e-4)
    assert res.x[0] == pytest.approx(expected, abs=1e-5)


def test_fixed_mask_freezes_coordinates():
    pr = Problem((Variable("a", -5, 5), Variable("b", -5, 5)),
                 ex.power(ex.var(0) - 1, 2) + ex.power(ex.var(1) - 2, 2))
    res = solve_local(NlpTask(pr, np.array([0.5, 0.0]), fixed=np.array([True, False])))
    assert res.x[0] == 0.5
    assert res.x[1] == pytest.approx(2.0, abs=1e-5)


def test_start_is_clipped_to_box():
    res = solve_local(NlpTask(one_var(X, lo=1.0, hi=2.0), np.array([7.0])))
    assert res.x[0] == pytest.approx(1.0)


def test_unevaluable_start_is_moved():
    # log needs x > 0; the start at 0 cannot be evaluated
    res = solve_local(NlpTask(one_var(-ex.log(X), lo=0.0, hi=4.0), np.array([0.0])))
    assert res.ok and res.x[0] == pytest.approx(4.0, abs=1e-5)


def test_infeasible_problem_reports_failure():
    pr = one_var(X, [1 - X, X - 0.5])
    res = solve_local(NlpTask(pr, np.array([0.0])))
    assert res.status is NlpStatus.FAILED
    assert res.max_violation > 1e-3


def test_kkt_point_on_disk():
    # min x + y on the unit disk: optimum (-1/sqrt2, -1/sqrt2), lambda = 1/sqrt2
    pr = Problem((Variable("a", -2, 2), Variable("b", -2, 2)), ex.var(0) + ex.var(1),
                 (ex.power(ex.var(0), 2) + ex.power(ex.var(1), 2) - 1,))
    res = solve_local(NlpTask(pr, np.array([0.3, -0.2])))
    s = 1 / np.sqrt(2)
    assert res.x == pytest.approx([-s, -s], abs=1e-5)
    assert res.status is NlpStatus.LOCALLY_OPTIMAL
    _, grad = augmented_lagrangian(pr, res.x, res.multipliers, res.penalty)
    assert projected_gradient_norm(res.x, grad, pr.lb, pr.ub, np.ones(2, bool)) <= 1e-4


def test_augmented_lagrangian_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for seed in range(5):
        pr = relax_integrality(random_nonconvex(seed, n_bin=2)[0].problem)
        lam = rng.uniform(0, 2, len(pr.constraints))
        for _ in range(10):
            x = rng.uniform(pr.lb + 0.1, pr.ub - 0.1)
            _, g = augmented_lagrangian(pr, x, lam, 10.0)
            fd = five_point_gradient(lambda p: augmented_lagrangian(pr, p, lam, 10.0)[0], x, 1e-5)
            assert relative_error(g, fd) <= 1e-5


def feasible_starts(pr, rng, count):
    out = []
    while len(out) < count:
        x = rng.uniform(pr.lb, pr.ub)
        if is_feasible(pr, x)[0]:
            out.append(x)
    return out


def test_descent_invariant_from_feasible_starts():
    rng = np.random.default_rng(1)
    checked = 0
    for seed in range(10):
        pr = relax_integrality(random_nonconvex(seed, n_bin=3)[0].problem)
        for x0 in feasible_starts(pr, rng, 5):
            res = solve_local(NlpTask(pr, x0))
            assert res.ok and is_feasible(pr, res.x)[0]
            assert res.objective <= ex.evaluate(pr.objective, x0) + 1e-9
            checked += 1
        pr = relax_integrality(random_interior(seed).problem)
        for x0 in feasible_starts(pr, rng, 5):
            res = solve_local(NlpTask(pr, x0))
            assert res.ok and is_feasible(pr, res.x)[0]
            assert res.objective <= ex.evaluate(pr.objective, x0) + 1e-9
            checked += 1
    assert checked == 100


def test_deterministic():
    pr = relax_integrality(random_nonconvex(3)[0].problem)
    x0 = np.full(pr.n, 0.5)
    a, b = solve_local(NlpTask(pr, x0)), solve_local(NlpTask(pr, x0))
    assert a.x.tolist() == b.x.tolist() and a.outer_iterations == b.outer_iterations
