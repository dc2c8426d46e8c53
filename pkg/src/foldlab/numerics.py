"""Shared numeric utilities: log-space magnitudes and exact rationals.

Two backends run through the whole package:

* ``float`` — ordinary binary floating point, fine while every quantity stays
  within ~1e-300 of unity;
* ``rational`` — :class:`fractions.Fraction` everywhere, used when Cantor gaps
  or schedule scales fall below floating resolution at positions of order one.

Magnitudes that may underflow (word widths, schedule scales, rescaling
factors) are carried as :class:`LogReal`: a sign and the natural log of the
absolute value.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Number = Union[int, float, Fraction]

FLOAT_BACKEND = "float"
RATIONAL_BACKEND = "rational"


def as_fraction(value) -> Fraction:
    """Parse a number given as int/float/Fraction or a string like '1/100000000'."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**18)
    if isinstance(value, str):
        s = value.strip()
        if "/" in s:
            num, den = s.split("/", 1)
            return Fraction(int(num), int(den))
        return Fraction(s)  # handles decimal strings exactly
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def rational_sqrt(value: Fraction, digits: int = 30) -> Fraction:
    """Best rational approximation of sqrt(value) with ~`digits` decimal digits.

    The result s satisfies |s - sqrt(value)| <= 10**-digits (for value <= 1).
    """
    if value < 0:
        raise ValueError("negative radicand")
    scale = 10**digits
    num = value.numerator * scale * scale
    den = value.denominator
    return Fraction(math.isqrt(num // den), scale)


def log_of(x: Number) -> float:
    """Natural log of a positive int/float/Fraction, safe for huge/tiny Fractions."""
    if isinstance(x, Fraction):
        if x <= 0:
            raise ValueError("log of non-positive value")
        return _log_int(x.numerator) - _log_int(x.denominator)
    if x <= 0:
        raise ValueError("log of non-positive value")
    return math.log(x)


def _log_int(n: int) -> float:
    try:
        return math.log(n)
    except OverflowError:
        # n exceeds float range: peel off the bit length
        k = n.bit_length() - 60
        return math.log(n >> k) + k * math.log(2)


class LogReal:
    """A real number stored as (sign, log|value|).

    Supports multiplication, division, powers and comparisons without ever
    materializing the value; ``to_float`` converts back (0.0 on underflow).
    """

    __slots__ = ("sign", "log")

    def __init__(self, sign: int, log: float):
        if sign == 0:
            log = float("-inf")
        self.sign = sign
        self.log = log

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_value(cls, x: Number) -> "LogReal":
        if x == 0:
            return cls(0, float("-inf"))
        sign = 1 if x > 0 else -1
        return cls(sign, log_of(x if sign > 0 else -x))

    @classmethod
    def from_log(cls, log: float, sign: int = 1) -> "LogReal":
        return cls(sign, log)

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(0, float("-inf"))

    @classmethod
    def one(cls) -> "LogReal":
        return cls(1, 0.0)

    # -- conversions -------------------------------------------------------
    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log)
        except OverflowError:
            return self.sign * float("inf")

    def __abs__(self) -> "LogReal":
        return LogReal(abs(self.sign), self.log)

    # -- arithmetic --------------------------------------------------------
    def __mul__(self, other) -> "LogReal":
        other = _coerce(other)
        return LogReal(self.sign * other.sign, self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogReal":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogReal division by zero")
        return LogReal(self.sign * other.sign, self.log - other.log)

    def __pow__(self, exponent: float) -> "LogReal":
        if self.sign == 0:
            return LogReal.zero()
        if self.sign < 0:
            raise ValueError("power of a negative LogReal")
        return LogReal(1, self.log * exponent)

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.log)

    def __add__(self, other) -> "LogReal":
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log >= other.log else (other, self)
        d = small.log - big.log  # <= 0
        if self.sign == other.sign:
            return LogReal(big.sign, big.log + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogReal.zero()
        return LogReal(big.sign, big.log + math.log1p(-math.exp(d)))

    __radd__ = __add__

    def __sub__(self, other) -> "LogReal":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "LogReal":
        return _coerce(other) + (-self)

    # -- comparisons (total order on the represented values) --------------
    def _key(self):
        return (self.sign, self.sign * self.log if self.sign else 0.0)

    def __lt__(self, other):
        other = _coerce(other)
        if self.sign != other.sign:
            return self.sign < other.sign
        if self.sign == 0:
            return False
        return (self.log < other.log) if self.sign > 0 else (self.log > other.log)

    def __le__(self, other):
        other = _coerce(other)
        return self < other or self == other

    def __gt__(self, other):
        return _coerce(other) < self

    def __ge__(self, other):
        other = _coerce(other)
        return other < self or self == other

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        if self.sign != other.sign:
            return False
        if self.sign == 0:
            return True
        return self.log == other.log

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.sign == 0:
            return "LogReal(0)"
        s = "-" if self.sign < 0 else ""
        return f"LogReal({s}exp({self.log:.6g}))"


def _coerce(x) -> LogReal:
    if isinstance(x, LogReal):
        return x
    if isinstance(x, (int, float, Fraction)):
        return LogReal.from_value(x)
    raise TypeError(f"cannot coerce {x!r} to LogReal")


def sup_norm(vector) -> "LogReal":
    """Max-abs norm of a vector of backend numbers, as a LogReal."""
    best = LogReal.zero()
    for v in vector:
        a = abs(LogReal.from_value(v))
        if a > best:
            best = a
    return best
