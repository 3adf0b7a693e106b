import math

import numpy as np
import pytest

from transportlab import expressions as ex
from transportlab.errors import SpecError


def test_parse_and_evaluate_basics():
    node = ex.parse_expression("1 + 2*x0 - x1/4", 2)
    assert ex.evaluate(node, (3.0, 8.0)) == pytest.approx(1 + 6 - 2)


def test_power_right_associative():
    node = ex.parse_expression("2^3^2", 1)
    assert ex.evaluate(node, (0.0,)) == pytest.approx(2.0**9)


def test_unary_minus_and_constants():
    node = ex.parse_expression("-sin(pi/2) + e^0", 1)
    assert ex.evaluate(node, (0.0,)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("text", ["sin(x0)^2", "exp(-x0*x1)", "sqrt(1+x1^2)",
                                  "log(x0)/x1", "cos(x0)*sin(x1)"])
def test_symbolic_derivative_matches_fd(text):
    node = ex.parse_expression(text, 2)
    x = np.array([0.7, 1.3])
    h = 1e-6
    for var in range(2):
        d = ex.differentiate(node, var)
        xp = x.copy()
        xm = x.copy()
        xp[var] += h
        xm[var] -= h
        fd = (ex.evaluate(node, xp) - ex.evaluate(node, xm)) / (2 * h)
        assert ex.evaluate(d, x) == pytest.approx(fd, rel=1e-8, abs=1e-9)


def test_higher_derivatives_exact():
    # d^4/dx^4 sin(x)^2 = -8 cos(2x)
    node = ex.parse_expression("sin(x0)^2", 1)
    for _ in range(4):
        node = ex.differentiate(node, 0)
    x = 0.37
    assert ex.evaluate(node, (x,)) == pytest.approx(-8 * math.cos(2 * x), rel=1e-14)


def test_predicate():
    pred = ex.parse_predicate("x0>0 && x0<pi", 1)
    assert ex.evaluate_predicate(pred, (1.0,))
    assert not ex.evaluate_predicate(pred, (-1.0,))
    assert not ex.evaluate_predicate(pred, (4.0,))
    either = ex.parse_predicate("x0<0 || x0>1", 1)
    assert ex.evaluate_predicate(either, (2.0,))
    assert not ex.evaluate_predicate(either, (0.5,))


def test_parse_errors():
    with pytest.raises(SpecError):
        ex.parse_expression("x5", 2)
    with pytest.raises(SpecError):
        ex.parse_expression("foo(x0)", 1)
    with pytest.raises(SpecError):
        ex.parse_expression("1 +", 1)
    with pytest.raises(SpecError):
        ex.parse_predicate("x0", 1)
