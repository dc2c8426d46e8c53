import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from foldlab.numerics import LogReal, as_fraction, log_of, rational_sqrt, sup_norm

finite = st.floats(min_value=-1e6, max_value=1e6,
                   allow_nan=False, allow_infinity=False)
nonzero = finite.filter(lambda x: abs(x) > 1e-6)


def test_as_fraction_strings():
    assert as_fraction("1/100000000") == Fraction(1, 10**8)
    assert as_fraction("0.25") == Fraction(1, 4)
    assert as_fraction(Fraction(3, 7)) == Fraction(3, 7)
    assert as_fraction(2) == 2
    with pytest.raises(TypeError):
        as_fraction(object())


def test_rational_sqrt_accuracy():
    v = Fraction(1, 10**9)
    s = rational_sqrt(v, digits=30)
    assert abs(s * s - v) < Fraction(1, 10**28)


def test_log_of_huge_fraction():
    x = Fraction(10) ** 5000
    assert math.isclose(log_of(x), 5000 * math.log(10), rel_tol=1e-12)
    assert math.isclose(log_of(1 / x), -5000 * math.log(10), rel_tol=1e-12)
    with pytest.raises(ValueError):
        log_of(Fraction(0))


@given(nonzero, nonzero)
def test_logreal_mul_div(a, b):
    x, y = LogReal.from_value(a), LogReal.from_value(b)
    assert math.isclose((x * y).to_float(), a * b, rel_tol=1e-12)
    assert math.isclose((x / y).to_float(), a / b, rel_tol=1e-12)


@given(finite, finite)
def test_logreal_add_sub(a, b):
    x, y = LogReal.from_value(a), LogReal.from_value(b)
    assert math.isclose((x + y).to_float(), a + b,
                        rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose((x - y).to_float(), a - b,
                        rel_tol=1e-9, abs_tol=1e-9)


@given(finite, finite)
def test_logreal_order_matches_floats(a, b):
    x, y = LogReal.from_value(a), LogReal.from_value(b)
    assert (x < y) == (a < b)
    assert (x == y) == (a == b)
    assert (x <= y) == (a <= b)


def test_logreal_no_underflow():
    tiny = LogReal.from_log(-2000.0)
    assert tiny.to_float() == 0.0  # underflows as a float...
    assert tiny > LogReal.zero()  # ...but stays ordered as a magnitude
    assert (tiny * tiny).log == -4000.0


def test_logreal_cancellation():
    x = LogReal.from_value(5.0)
    assert (x - x) == LogReal.zero()
    assert (-x).sign == -1


def test_sup_norm():
    v = [Fraction(1, 3), Fraction(-1, 2), Fraction(0)]
    assert math.isclose(sup_norm(v).to_float(), 0.5, rel_tol=1e-12)
    assert sup_norm([0, 0]) == LogReal.zero()
