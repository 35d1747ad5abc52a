"""Outward-rounded interval arithmetic over NumPy arrays.

An :class:`Interval` holds ``lo``/``hi`` that are either floats or arrays of
the same shape, so one set of kernels serves both scalar enclosures and the
batched evaluation used by the subdivision engine.

Rounding model: every basic operation is computed in round-to-nearest and the
endpoints are then pushed one ulp outward with ``nextafter``.  Results of
``+ - * /`` and ``sqrt`` are correctly rounded by IEEE 754, so one ulp
suffices.  ``sin cos exp log`` are not guaranteed to be correctly rounded by
the platform libm, so their endpoints are additionally widened by a relative
``TRANSCENDENTAL_SLACK`` (16 unit roundoffs) before the nudge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as ex
from .rounding import round_down, round_up

INF = np.inf
TRANSCENDENTAL_SLACK = 16 * 2.0 ** -53
TWO_PI = 2 * math.pi
# arguments beyond this get the trivial enclosure [-1, 1] for sin/cos
_TRIG_LIMIT = 1e8


class IntervalDomainError(ArithmeticError):
    """An enclosure touched values outside an operation's domain.

    ``index`` is the flat position of the first offending element when the
    operation was batched, else ``None``.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def _down(x):
    return np.nextafter(x, -INF)


def _up(x):
    return np.nextafter(x, INF)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _fail(mask, message: str):
    flat = np.flatnonzero(np.asarray(mask))
    raise IntervalDomainError(message, int(flat[0]) if flat.size else None)


class Interval:
    """Closed interval ``[lo, hi]``; ``lo``/``hi`` may be arrays (elementwise intervals)."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        self.lo = _scalar(lo)
        self.hi = _scalar(hi)

    @classmethod
    def point(cls, x) -> Interval:
        return cls(x, x)

    @classmethod
    def from_fraction(cls, q: Fraction) -> Interval:
        return cls(round_down(q), round_up(q))

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __iter__(self):
        yield self.lo
        yield self.hi

    # -- queries ----------------------------------------------------------
    def contains(self, x):
        return np.logical_and(self.lo <= x, x <= self.hi)

    def subset_of(self, other: Interval):
        return np.logical_and(other.lo <= self.lo, self.hi <= other.hi)

    @property
    def width(self):
        return _up(np.subtract(self.hi, self.lo))

    @property
    def mid(self):
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def mag(self):
        """Upper bound of ``|x|`` over the interval."""
        return _scalar(np.maximum(np.abs(self.lo), np.abs(self.hi)))

    def mig(self):
        """Lower bound of ``|x|`` over the interval (0 if it straddles zero)."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        out = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))
        return _scalar(out)

    def contains_zero(self):
        return np.logical_and(np.asarray(self.lo) <= 0, np.asarray(self.hi) >= 0)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        o = _coerce(other)
        return Interval(_down(np.add(self.lo, o.lo)), _up(np.add(self.hi, o.hi)))

    __radd__ = __add__

    def __neg__(self):
        return Interval(np.negative(self.hi), np.negative(self.lo))

    def __sub__(self, other):
        o = _coerce(other)
        return Interval(_down(np.subtract(self.lo, o.hi)), _up(np.subtract(self.hi, o.lo)))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        o = _coerce(other)
        with np.errstate(invalid="ignore", over="ignore"):
            p = (np.multiply(self.lo, o.lo), np.multiply(self.lo, o.hi),
                 np.multiply(self.hi, o.lo), np.multiply(self.hi, o.hi))
            lo = np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3]))
            hi = np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3]))
        nan = np.isnan(p[0]) | np.isnan(p[1]) | np.isnan(p[2]) | np.isnan(p[3])
        if np.any(nan):
            lo = np.where(nan, -INF, lo)
            hi = np.where(nan, INF, hi)
        return Interval(_down(lo), _up(hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        bad = o.contains_zero()
        if np.any(bad):
            _fail(bad, "division by an interval containing zero")
        with np.errstate(over="ignore"):  # 1/tiny overflows to inf, which is still an enclosure
            inv = Interval(_down(np.divide(1.0, o.hi)), _up(np.divide(1.0, o.lo)))
        return self * inv

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, n: int):
        return ipow(self, n)

    def sqr(self):
        return ipow(self, 2)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, Fraction):
        return Interval.from_fraction(x)
    return Interval(x, x)


def hull(*xs: Interval) -> Interval:
    lo = xs[0].lo
    hi = xs[0].hi
    for x in xs[1:]:
        lo = np.minimum(lo, x.lo)
        hi = np.maximum(hi, x.hi)
    return Interval(lo, hi)


# -- elementary functions ----------------------------------------------------

def _pow_nonneg(a, n: int, up: bool):
    nudge = _up if up else _down
    result = np.asarray(a, dtype=float)
    out = result
    with np.errstate(over="ignore"):
        for _ in range(n - 1):
            out = nudge(out * result)
    if not up:
        out = np.maximum(out, 0.0)
    return out


def ipow(x: Interval, n: int) -> Interval:
    if n < 0:
        raise ValueError("negative integer powers are not supported")
    if n == 0:
        return Interval(np.ones_like(np.asarray(x.lo, dtype=float)))
    if n == 1:
        return x
    lo, hi = np.asarray(x.lo, dtype=float), np.asarray(x.hi, dtype=float)
    if n % 2 == 0:
        m_lo = np.asarray(x.mig(), dtype=float)
        m_hi = np.asarray(x.mag(), dtype=float)
        return Interval(_pow_nonneg(m_lo, n, False), _pow_nonneg(m_hi, n, True))
    # odd powers are increasing; x^n = -(-x)^n for negative x
    alo, ahi = np.abs(lo), np.abs(hi)
    lo_out = np.where(lo < 0, -_pow_nonneg(alo, n, True), _pow_nonneg(alo, n, False))
    hi_out = np.where(hi < 0, -_pow_nonneg(ahi, n, False), _pow_nonneg(ahi, n, True))
    return Interval(lo_out, hi_out)


def _widen(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo = _down(lo - np.abs(lo) * TRANSCENDENTAL_SLACK)
    hi = _up(hi + np.abs(hi) * TRANSCENDENTAL_SLACK)
    return lo, hi


def iexp(x: Interval) -> Interval:
    with np.errstate(over="ignore"):
        lo, hi = _widen(np.exp(x.lo), np.exp(x.hi))
    return Interval(np.maximum(lo, 0.0), hi)


def ilog(x: Interval) -> Interval:
    bad = np.asarray(x.lo) <= 0
    if np.any(bad):
        _fail(bad, "log over an interval reaching nonpositive values")
    lo, hi = _widen(np.log(x.lo), np.log(x.hi))
    return Interval(lo, hi)


def isqrt(x: Interval) -> Interval:
    bad = np.asarray(x.lo) < 0
    if np.any(bad):
        _fail(bad, "sqrt over an interval reaching negative values")
    lo = np.maximum(_down(np.sqrt(x.lo)), 0.0)
    return Interval(lo, _up(np.sqrt(x.hi)))


def _contains_phase(lo, hi, phase):
    """Whether [lo, hi] (conservatively widened) contains phase + 2*pi*k for some integer k."""
    tol = 1e-9 * (1.0 + np.abs(lo) + np.abs(hi))
    k = np.ceil((lo - tol - phase) / TWO_PI)
    return phase + TWO_PI * k <= hi + tol


def _trig(x: Interval, fn, max_phase, min_phase) -> Interval:
    lo = np.asarray(x.lo, dtype=float)
    hi = np.asarray(x.hi, dtype=float)
    a, b = fn(lo), fn(hi)
    elo, ehi = _widen(np.minimum(a, b), np.maximum(a, b))
    # absolute slack covers results near zero where relative widening is tiny
    elo = elo - 2.0 ** -60
    ehi = ehi + 2.0 ** -60
    wide = (hi - lo >= TWO_PI) | (np.abs(lo) > _TRIG_LIMIT) | (np.abs(hi) > _TRIG_LIMIT)
    has_max = wide | _contains_phase(lo, hi, max_phase)
    has_min = wide | _contains_phase(lo, hi, min_phase)
    out_hi = np.where(has_max, 1.0, np.minimum(ehi, 1.0))
    out_lo = np.where(has_min, -1.0, np.maximum(elo, -1.0))
    return Interval(out_lo, out_hi)


def isin(x: Interval) -> Interval:
    return _trig(x, np.sin, math.pi / 2, -math.pi / 2)


def icos(x: Interval) -> Interval:
    return _trig(x, np.cos, 0.0, math.pi)


INTERVAL_FUNCS = {"sin": isin, "cos": icos, "exp": iexp, "log": ilog, "sqrt": isqrt}


# -- boxes -------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box given by its lower and upper corners."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ValueError("corners must be nonempty and of equal length")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ValueError("every side of a box must have positive length")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, half_width: float, n: int) -> BoxDomain:
        return cls((-half_width,) * n, (half_width,) * n)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lower, self.upper))

    def intervals(self) -> list[Interval]:
        return [Interval(l, h) for l, h in zip(self.lower, self.upper)]

    def contains(self, p: Sequence[float]) -> bool:
        return all(l <= x <= h for l, x, h in zip(self.lower, p, self.upper))

    def midpoint(self) -> tuple[float, ...]:
        return tuple(l + (h - l) / 2 for l, h in zip(self.lower, self.upper))


# -- compiled evaluation -----------------------------------------------------

class Tape:
    """A set of expressions flattened into one instruction list with shared subterms.

    Evaluating the tape walks every distinct subexpression once, for any number
    of boxes (interval mode) or points (float mode) at a time.
    """

    def __init__(self, exprs: Sequence[ex.Expr]):
        slots: dict[ex.Expr, int] = {}
        code: list[tuple[str, tuple[int, ...], object]] = []

        def emit(e: ex.Expr) -> int:
            hit = slots.get(e)
            if hit is not None:
                return hit
            for node in ex.walk(e):
                if node in slots:
                    continue
                args = tuple(slots[a] for a in node.args)
                slots[node] = len(code)
                code.append((node.kind, args, node.data))
            return slots[e]

        self.outputs = [emit(e) for e in exprs]
        self.code = code
        self.n_vars = 1 + max((d for k, _, d in code if k == ex.VAR), default=-1)

    def __len__(self) -> int:
        return len(self.code)

    def eval_interval(self, lo: np.ndarray, hi: np.ndarray) -> list[Interval]:
        """Enclosures of every output over the boxes ``[lo[b], hi[b]]`` (arrays of shape (B, N))."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = lo.shape[:-1]
        regs: list[Interval] = []
        for kind, args, data in self.code:
            if kind == ex.CONST:
                v = Interval.from_fraction(data)
            elif kind == ex.VAR:
                v = Interval(lo[..., data], hi[..., data])
            elif kind == ex.ADD:
                v = regs[args[0]]
                for a in args[1:]:
                    v = v + regs[a]
            elif kind == ex.MUL:
                v = regs[args[0]]
                for a in args[1:]:
                    v = v * regs[a]
            elif kind == ex.NEG:
                v = -regs[args[0]]
            elif kind == ex.POW:
                v = ipow(regs[args[0]], data)
            elif kind == ex.DIV:
                v = regs[args[0]] / regs[args[1]]
            else:
                v = INTERVAL_FUNCS[kind](regs[args[0]])
            regs.append(v)
        out = []
        for s in self.outputs:
            r = regs[s]
            out.append(Interval(np.broadcast_to(r.lo, shape).copy(), np.broadcast_to(r.hi, shape).copy()))
        return out

    def eval_float(self, pts: np.ndarray) -> list[np.ndarray]:
        """Round-to-nearest values of every output at the points ``pts`` (shape (B, N)).

        Domain violations produce NaN rather than an exception.
        """
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1]
        regs: list = []
        with np.errstate(all="ignore"):
            for kind, args, data in self.code:
                if kind == ex.CONST:
                    v = float(data)
                elif kind == ex.VAR:
                    v = pts[..., data]
                elif kind == ex.ADD:
                    v = regs[args[0]]
                    for a in args[1:]:
                        v = v + regs[a]
                elif kind == ex.MUL:
                    v = regs[args[0]]
                    for a in args[1:]:
                        v = v * regs[a]
                elif kind == ex.NEG:
                    v = -regs[args[0]]
                elif kind == ex.POW:
                    v = regs[args[0]] ** data
                elif kind == ex.DIV:
                    den = regs[args[1]]
                    v = regs[args[0]] / np.where(den == 0, np.nan, den)
                elif kind == "log":
                    a = regs[args[0]]
                    v = np.log(np.where(a > 0, a, np.nan))
                elif kind == "sqrt":
                    a = regs[args[0]]
                    v = np.sqrt(np.where(a >= 0, a, np.nan))
                else:
                    v = getattr(np, kind)(regs[args[0]])
                regs.append(v)
        return [np.broadcast_to(np.asarray(regs[s], dtype=float), shape).copy() for s in self.outputs]


def _box_arrays(d: BoxDomain):
    return np.array([d.lower], dtype=float), np.array([d.upper], dtype=float)


def ienc(e: ex.Expr, d: BoxDomain) -> Interval:
    """Natural interval extension of ``e`` over the box ``d``."""
    lo, hi = _box_arrays(d)
    r = Tape([e]).eval_interval(lo, hi)[0]
    return Interval(float(r.lo[0]), float(r.hi[0]))


def _norm2_up(mags: Sequence[np.ndarray]) -> np.ndarray:
    """Upward-rounded Euclidean norm of a vector of nonnegative magnitude bounds."""
    total = np.zeros_like(np.asarray(mags[0], dtype=float))
    with np.errstate(over="ignore"):
        for m in mags:
            total = _up(total + _up(m * m))
    return _up(np.sqrt(total))


def grad_norm_bounds(tape_out: Sequence[Interval]) -> np.ndarray:
    """Upper bound of ``|v|_2`` given enclosures of the components of ``v``."""
    return _norm2_up([np.asarray(i.mag()) for i in tape_out])


def frobenius_bounds(entries: Sequence[Interval], n: int) -> np.ndarray:
    """Upper bound of the Frobenius norm of a symmetric matrix.

    ``entries`` lists the upper triangle row by row; off-diagonal entries count twice.
    """
    mags = []
    idx = 0
    for j in range(n):
        for l in range(j, n):
            m = np.asarray(entries[idx].mag())
            mags.append(m)
            if l != j:
                mags.append(m)
            idx += 1
    return _norm2_up(mags)


def upper_triangle(fs: ex.FunctionSystem, i: int) -> list[ex.Expr]:
    n = fs.dimension
    return [fs.hessians[i][j][l] for j in range(n) for l in range(j, n)]


def bound_grad_norm2(fs: ex.FunctionSystem, i: int, d: BoxDomain) -> float:
    """Certified upper bound of ``|grad f_i|_2`` over ``d``."""
    lo, hi = _box_arrays(d)
    out = Tape(fs.gradients[i]).eval_interval(lo, hi)
    return float(grad_norm_bounds(out)[0])


def bound_hess_norm2(fs: ex.FunctionSystem, i: int, d: BoxDomain) -> float:
    """Certified upper bound of the spectral norm of ``Hess f_i`` over ``d`` (via Frobenius)."""
    lo, hi = _box_arrays(d)
    out = Tape(upper_triangle(fs, i)).eval_interval(lo, hi)
    return float(frobenius_bounds(out, fs.dimension)[0])


def interval_det(m: Sequence[Sequence[Interval]]) -> Interval:
    """Enclosure of the determinant of an interval matrix.

    Cofactor expansion up to 4x4; Gaussian elimination beyond that, in which a
    pivot containing zero yields the trivial enclosure.
    """
    k = len(m)
    if k == 1:
        return m[0][0]
    if k == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if k <= 4:
        total = None
        for j in range(k):
            minor = [row[:j] + row[j + 1:] for row in m[1:]]
            term = m[0][j] * interval_det(minor)
            if j % 2:
                term = -term
            total = term if total is None else total + term
        return total
    a = [list(row) for row in m]
    det = Interval(1.0)
    unknown = np.zeros(np.shape(a[0][0].lo), dtype=bool)
    for c in range(k):
        piv = a[c][c]
        zero = piv.contains_zero()
        unknown = unknown | zero
        # replace singular pivots by 1 to keep the arithmetic going; flagged as unknown
        safe = Interval(np.where(zero, 1.0, piv.lo), np.where(zero, 1.0, piv.hi))
        det = det * safe
        for r in range(c + 1, k):
            factor = a[r][c] / safe
            for j in range(c + 1, k):
                a[r][j] = a[r][j] - factor * a[c][j]
    return Interval(np.where(unknown, -INF, det.lo), np.where(unknown, INF, det.hi))
