import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbminlp import expr as ex
from lbminlp.expr import DomainError, Interval, ParseError

from helpers import five_point_gradient, random_tree, relative_error
from oracles import py_eval


def test_parse_structure():
    assert ex.parse("(+ x0 1)") == ex.Expr(ex.SUM, (ex.var(0), ex.const(1.0)))
    assert ex.parse("(^ x0 2)") == ex.Expr(ex.POWER, (ex.var(0),), 2)
    e = ex.parse("(* x0 x1 x2)")
    assert e.op == ex.PRODUCT and [c.index for c in e.children] == [0, 1, 2]


@pytest.mark.parametrize("text", [
    "", "(", "(+ x0", "(+ x0 1))", "(foo x0)", "(^ x0 1.5)", "(/ x0)",
    "(exp x0 x1)", "y0", "(+ x0 abc)",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        ex.parse(text)


def test_parse_error_has_position():
    with pytest.raises(ParseError) as info:
        ex.parse("(+ x0 (foo 1))")
    assert info.value.position == 7


def test_unary_minus():
    e = ex.parse("(- x0)")
    assert ex.evaluate(e, [3.0]) == -3.0


def test_evaluate_examples():
    assert ex.evaluate(ex.parse("(+ (* x0 x1) 1)"), [2, 3]) == 7
    assert ex.evaluate(ex.parse("(exp x0)"), [0]) == 1
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse("(log x0)"), [-1])


@pytest.mark.parametrize("text, point", [
    ("(sqrt x0)", [-1.0]),
    ("(/ 1 x0)", [0.0]),
    ("(log x0)", [0.0]),
    ("(exp x0)", [1000.0]),
])
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse(text), point)


def test_gradient_examples():
    assert ex.gradient(ex.parse("(^ x0 2)"), [3]).tolist() == [6.0]
    assert ex.gradient(ex.parse("(* x0 x1)"), [2, 5]).tolist() == [5.0, 2.0]


def test_gradient_of_shared_subtree():
    s = ex.parse("(+ x0 x1)")
    e = s * s
    assert ex.gradient(e, [1.0, 2.0]).tolist() == [6.0, 6.0]


def test_sqrt_not_differentiable_at_zero():
    assert ex.evaluate(ex.parse("(sqrt x0)"), [0.0]) == 0.0
    with pytest.raises(DomainError):
        ex.gradient(ex.parse("(sqrt x0)"), [0.0])


def test_random_trees_match_reference_evaluator_and_finite_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        e = random_tree(rng, 3, 4)
        x = rng.uniform(0.5, 2.0, 3)
        ref = py_eval(e, x)
        assert ex.evaluate(e, x) == pytest.approx(ref, rel=1e-12, abs=1e-12)
        fd = five_point_gradient(lambda p: py_eval(e, p), x)
        worst = max(worst, relative_error(ex.gradient(e, x), fd))
    assert worst <= 1e-5


def test_interval_examples():
    box = [Interval(0, 1), Interval(0, 1)]
    r = ex.interval(ex.parse("(* x0 x1)"), box)
    assert r.lo == 0.0 and r.hi == pytest.approx(1.0)
    r = ex.interval(ex.parse("(^ x0 2)"), [Interval(-1, 2)])
    assert r.lo == 0.0 and r.hi == pytest.approx(4.0)
    r = ex.interval(ex.parse("(- x0 x0)"), [Interval(0, 1)])
    assert r.lo == pytest.approx(-1.0) and r.hi == pytest.approx(1.0)


def test_interval_rejects_unbounded_nonlinear_variable():
    with pytest.raises(ex.ExpressionError):
        ex.interval(ex.parse("(^ x0 2)"), [Interval(0, math.inf)])
    # linear occurrences are fine
    r = ex.interval(ex.parse("(+ x0 1)"), [Interval(0, math.inf)])
    assert r.hi == math.inf


def test_interval_soundness_on_random_trees():
    rng = np.random.default_rng(5)
    for _ in range(300):
        e = random_tree(rng, 3, 3)
        lo = rng.uniform(0.5, 1.5, 3)
        hi = lo + rng.uniform(0, 0.5, 3)
        enc = ex.interval(e, [Interval(a, b) for a, b in zip(lo, hi)])
        for x in rng.uniform(lo, hi, (50, 3)):
            v = py_eval(e, x)
            assert enc.lo <= v <= enc.hi


def test_to_string_round_trip_random():
    rng = np.random.default_rng(3)
    for _ in range(300):
        e = random_tree(rng, 4, 4)
        assert ex.parse(ex.to_string(e)) == e


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_constants_round_trip_exactly(c):
    e = ex.const(c) + ex.var(0)
    assert ex.parse(ex.to_string(e)) == e


def test_variables_and_nonlinear_variables():
    e = ex.parse("(+ x0 (* 2 x1) (* x2 x3) (exp x4))")
    assert ex.variables(e) == {0, 1, 2, 3, 4}
    assert ex.nonlinear_variables(e) == {2, 3, 4}


def test_linear_helper():
    e = ex.linear({0: 2.0, 2: -1.0}, 3.0)
    assert ex.evaluate(e, [1.0, 9.0, 4.0]) == 1.0
