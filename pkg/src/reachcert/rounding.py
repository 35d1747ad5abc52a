"""Scalar arithmetic with exact directed rounding.

Each helper computes the exact rational result of its float/Fraction inputs
and rounds it once in the requested direction, so a result is never more
than one ulp away from the round-to-nearest value and is exact whenever the
true result is representable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from operator import mul as _mul

Number = float | int | Fraction


def _q(x: Number) -> Fraction:
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} in directed rounding")
    return x if isinstance(x, Fraction) else Fraction(x)


def round_down(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) > q:
        f = math.nextafter(f, -math.inf)
    return f


def round_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


def mul_down(*xs: Number) -> float:
    return round_down(reduce(_mul, map(_q, xs), Fraction(1)))


def mul_up(*xs: Number) -> float:
    return round_up(reduce(_mul, map(_q, xs), Fraction(1)))


def div_down(a: Number, b: Number) -> float:
    return round_down(_q(a) / _q(b))


def div_up(a: Number, b: Number) -> float:
    return round_up(_q(a) / _q(b))


def add_down(*xs: Number) -> float:
    return round_down(sum(map(_q, xs), Fraction(0)))


def add_up(*xs: Number) -> float:
    return round_up(sum(map(_q, xs), Fraction(0)))


def _sqrt_seed(q: Fraction) -> float:
    # integer square root keeps ~60 good bits even when float(q) under- or overflows
    if q == 0:
        return 0.0
    n, d = q.numerator, q.denominator
    shift = max(0, 128 - (n.bit_length() - d.bit_length()))
    shift += shift & 1
    return float(Fraction(math.isqrt((n << shift) // d), 1 << (shift // 2)))


def sqrt_down(x: Number) -> float:
    q = _q(x)
    if q < 0:
        raise ValueError("sqrt of a negative number")
    s = _sqrt_seed(q)
    while s > 0 and Fraction(s) ** 2 > q:
        s = math.nextafter(s, -math.inf)
    while Fraction(math.nextafter(s, math.inf)) ** 2 <= q:
        s = math.nextafter(s, math.inf)
    return s


def sqrt_up(x: Number) -> float:
    q = _q(x)
    if q < 0:
        raise ValueError("sqrt of a negative number")
    s = _sqrt_seed(q)
    while Fraction(s) ** 2 < q:
        s = math.nextafter(s, math.inf)
    while s > 0 and Fraction(math.nextafter(s, -math.inf)) ** 2 >= q:
        s = math.nextafter(s, -math.inf)
    return s


def _quarter_power(x: Number, quarters: int, up: bool) -> float:
    """x ** (quarters / 4) for x > 0, via an exact integer power and two square roots."""
    q = _q(x)
    if q <= 0:
        raise ValueError("fractional power of a nonpositive number")
    # both square roots round in the same direction, so the bound is preserved
    root = sqrt_up if up else sqrt_down
    if quarters >= 0:
        base = q ** quarters
        return root(_q(root(base)))
    # x^(-a) = 1 / x^a; round the denominator the opposite way
    denom = _quarter_power(q, -quarters, not up)
    return div_up(1, denom) if up else div_down(1, denom)


def qpow_up(x: Number, quarters: int) -> float:
    return _quarter_power(x, quarters, True)


def qpow_down(x: Number, quarters: int) -> float:
    return _quarter_power(x, quarters, False)
