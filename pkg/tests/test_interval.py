import math
import zlib
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from reachcert import expr as ex
from reachcert import rounding as rd
from reachcert.interval import (
    BoxDomain,
    Interval,
    IntervalDomainError,
    Tape,
    bound_grad_norm2,
    bound_hess_norm2,
    icos,
    ienc,
    iexp,
    ilog,
    interval_det,
    ipow,
    isin,
    isqrt,
)

from oracles import CORPUS_2D, to_sympy

mpmath.mp.dps = 50


def _random_boxes(rng, count, lo=-2.0, hi=2.0):
    w = np.exp(rng.uniform(np.log(1e-9), np.log(1.0), size=(count, 2)))
    a = rng.uniform(lo, hi - w)
    return a, a + w


@pytest.mark.parametrize("text", CORPUS_2D)
def test_enclosure_soundness_against_high_precision(text):
    # 8 formulas x 1250 (box, point) pairs = 10^4 soundness triples
    rng = np.random.default_rng(zlib.crc32(text.encode()))
    e = ex.parse(text, 2)
    lo, hi = _random_boxes(rng, 1250)
    enc = Tape([e]).eval_interval(lo, hi)[0]
    pts = lo + rng.uniform(0, 1, size=lo.shape) * (hi - lo)
    s, xs = to_sympy(text, 2)
    f = sympy.lambdify(xs, s, "mpmath")
    for b in range(len(pts)):
        v = f(mpmath.mpf(pts[b, 0]), mpmath.mpf(pts[b, 1]))
        assert enc.lo[b] <= v <= enc.hi[b], (text, lo[b], hi[b], pts[b])


@pytest.mark.parametrize("text", CORPUS_2D)
def test_derivative_enclosures_sound(text):
    fs = ex.FunctionSystem.from_strings([text], 2)
    rng = np.random.default_rng(7)
    lo, hi = _random_boxes(rng, 200, -1.5, 1.5)
    exprs = list(fs.gradients[0]) + [fs.hessians[0][0][0], fs.hessians[0][0][1], fs.hessians[0][1][1]]
    encs = Tape(exprs).eval_interval(lo, hi)
    pts = lo + rng.uniform(0, 1, size=lo.shape) * (hi - lo)
    for j, e in enumerate(exprs):
        for b in range(0, 200, 7):
            v = ex.evaluate(e, pts[b])
            tol = 1e-12 * (1 + abs(v))
            assert encs[j].lo[b] - tol <= v <= encs[j].hi[b] + tol


def test_nested_boxes_give_nested_enclosures():
    e = ex.parse(CORPUS_2D[1], 2)
    outer = ienc(e, BoxDomain((-0.5, -0.5), (0.5, 0.5)))
    inner = ienc(e, BoxDomain((-0.25, -0.1), (0.2, 0.3)))
    assert outer.lo <= inner.lo and inner.hi <= outer.hi


def test_enclosure_width_shrinks_with_box():
    e = ex.parse("sin(x*y) + exp(x) - y^3", 2)
    widths = []
    for k in range(1, 12):
        h = 2.0**-k
        widths.append(ienc(e, BoxDomain((0.3 - h, 0.2 - h), (0.3 + h, 0.2 + h))).width)
    assert all(b < a for a, b in zip(widths, widths[1:]))
    assert widths[-1] < 1e-2


@given(st.floats(-50, 50), st.floats(0, 10), st.integers(0, 7))
def test_ipow_contains_point_powers(a, w, n):
    x = Interval(a, a + w)
    r = ipow(x, n)
    for t in (0.0, 0.3, 0.5, 1.0):
        p = Fraction(a) + Fraction(w) * Fraction(t).limit_denominator(10)
        if p > Fraction(a + w):
            p = Fraction(a + w)
        exact = p**n
        assert Fraction(r.lo) <= exact <= Fraction(r.hi)


@given(st.floats(-3, 3), st.floats(1e-12, 4))
def test_transcendentals_contain_point_values(a, w):
    x = Interval(a, a + w)
    for fn, ifn in ((mpmath.sin, isin), (mpmath.cos, icos), (mpmath.exp, iexp)):
        r = ifn(x)
        for t in (0.0, 0.5, 1.0):
            p = mpmath.mpf(x.lo) + (mpmath.mpf(x.hi) - mpmath.mpf(x.lo)) * t  # a + w was rounded
            v = fn(p)
            assert r.lo <= v <= r.hi


@given(st.floats(1e-6, 10), st.floats(0, 10))
def test_log_sqrt_contain_endpoints(a, w):
    x = Interval(a, a + w)
    assert ilog(x).lo <= mpmath.log(mpmath.mpf(a)) <= ilog(x).hi
    assert isqrt(x).lo <= mpmath.sqrt(mpmath.mpf(a + w)) <= isqrt(x).hi


def test_trig_extrema_are_included():
    r = isin(Interval(1.0, 2.0))
    assert r.hi == 1.0
    r = icos(Interval(3.0, 3.5))
    assert r.lo == -1.0
    assert isin(Interval(-100.0, 100.0)).lo == -1.0


@given(st.floats(-10, 10), st.floats(0, 5), st.floats(-10, 10), st.floats(0, 5))
def test_arithmetic_soundness(a, w, b, v):
    x, y = Interval(a, a + w), Interval(b, b + v)
    px, py = Fraction(a) + Fraction(w) / 3, Fraction(b) + Fraction(v) / 7
    px = min(px, Fraction(a + w))
    py = min(py, Fraction(b + v))
    for r, exact in ((x + y, px + py), (x - y, px - py), (x * y, px * py)):
        assert _encloses(r, exact)
    if not y.contains_zero():
        assert _encloses(x / y, px / py)  # tiny divisors overflow to infinite endpoints


def _encloses(r, q: Fraction) -> bool:
    lo, hi = float(r.lo), float(r.hi)
    return (lo == -math.inf or Fraction(lo) <= q) and (hi == math.inf or q <= Fraction(hi))


def test_division_by_zero_interval_raises_with_index():
    x = Interval(np.array([1.0, 1.0, 1.0]), np.array([2.0, 2.0, 2.0]))
    y = Interval(np.array([1.0, -1.0, 3.0]), np.array([2.0, 1.0, 4.0]))
    with pytest.raises(IntervalDomainError) as info:
        x / y
    assert info.value.index == 1


def test_domain_errors_over_boxes():
    with pytest.raises(IntervalDomainError):
        ienc(ex.parse("log(x)", 2), BoxDomain((-1, 0), (1, 1)))
    with pytest.raises(IntervalDomainError):
        ienc(ex.parse("sqrt(x)", 2), BoxDomain((-1, 0), (1, 1)))


def test_mig_mag():
    assert Interval(-1, 2).mig() == 0.0
    assert Interval(-3, -1).mig() == 1.0
    assert Interval(-3, 2).mag() == 3.0


def test_decimal_constant_enclosure_is_sound():
    r = ienc(ex.parse("0.1 + x - x", 1), BoxDomain((0.0,), (0.0 + 2**-40,)))
    assert Fraction(r.lo) <= Fraction(1, 10) <= Fraction(r.hi)


def test_norm_bounds_dominate_samples():
    fs = ex.FunctionSystem.from_strings([CORPUS_2D[1]], 2)
    d = BoxDomain((-1.0, -0.5), (0.0, 0.5))
    g = bound_grad_norm2(fs, 0, d)
    h = bound_hess_norm2(fs, 0, d)
    rng = np.random.default_rng(0)
    for p in rng.uniform((-1, -0.5), (0, 0.5), size=(200, 2)):
        gv = [ex.evaluate(e, p) for e in fs.gradients[0]]
        hv = np.array([[ex.evaluate(fs.hessians[0][i][j], p) for j in range(2)] for i in range(2)])
        assert math.hypot(*gv) <= g
        assert np.linalg.norm(hv, 2) <= h


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_interval_det_contains_point_determinants(k):
    rng = np.random.default_rng(k)
    for _ in range(20):
        a = rng.normal(size=(k, k)) + 3 * np.eye(k)
        w = rng.uniform(0, 0.05, size=(k, k))
        m = [[Interval(a[i, j], a[i, j] + w[i, j]) for j in range(k)] for i in range(k)]
        r = interval_det(m)
        for t in (0.0, 0.5, 1.0):
            pt = a + t * w
            exact = sympy.Matrix([[Fraction(v) for v in row] for row in pt]).det()
            assert r.lo <= exact <= r.hi


def test_float_tape_nan_outside_domain():
    t = Tape([ex.parse("log(x) + sqrt(y)", 2)])
    out = t.eval_float(np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0]]))[0]
    assert out[0] == 1.0 and np.isnan(out[1]) and np.isnan(out[2])


@given(st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=10**6), st.integers(-12, 12))
def test_quarter_powers_bracket(q, quarters):
    lo, hi = rd.qpow_down(q, quarters), rd.qpow_up(q, quarters)
    assert lo <= hi
    # compare fourth powers exactly: lo^4 <= q^quarters <= hi^4
    target = q**quarters
    assert Fraction(lo) ** 4 <= target <= Fraction(hi) ** 4


@given(st.fractions(min_value=0, max_value=10**6, max_denominator=10**6))
def test_directed_sqrt(q):
    lo, hi = rd.sqrt_down(q), rd.sqrt_up(q)
    assert Fraction(lo) ** 2 <= q <= Fraction(hi) ** 2
    assert hi == lo or math.nextafter(lo, math.inf) == hi


@pytest.mark.parametrize("q", [Fraction(5e-324), Fraction(1e-323) * 5, Fraction(1, 10**700), Fraction(10**600)])
def test_directed_sqrt_extreme_magnitudes(q):
    # float(q) under/overflows here, so the ulp search must not start from it
    lo, hi = rd.sqrt_down(q), rd.sqrt_up(q)
    assert Fraction(lo) ** 2 <= q <= Fraction(hi) ** 2
    assert hi == lo or math.nextafter(lo, math.inf) == hi


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=5))
def test_directed_products_and_sums(xs):
    exact_p = math.prod((Fraction(x) for x in xs), start=Fraction(1))
    assert Fraction(rd.mul_down(*xs)) <= exact_p <= Fraction(rd.mul_up(*xs))
    exact_s = sum(Fraction(x) for x in xs)
    assert Fraction(rd.add_down(*xs)) <= exact_s <= Fraction(rd.add_up(*xs))
