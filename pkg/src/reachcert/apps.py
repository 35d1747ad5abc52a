"""Quantities that follow from a reach bound or a subdivision certificate.

Distances, covering numbers, diameter, curvature and first-eigenvalue
bounds, and the size of perturbations that keep a zero set smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .reach import Unbounded, Bound
from .rounding import add_up, div_down, mul_down, mul_up, sqrt_down, sqrt_up


class HypothesisError(ValueError):
    """Inputs violate the hypothesis under which a bound holds."""


def intrinsic_from_extrinsic_sqrt(tau: float, d: float) -> float:
    """Intrinsic distance bound sqrt(2 tau d) for points at extrinsic distance d <= tau/2."""
    if not (tau > 0 and d >= 0):
        raise HypothesisError("need tau > 0 and d >= 0")
    if Fraction(d) > Fraction(tau) / 2:
        raise HypothesisError(f"d={d!r} exceeds tau/2={tau / 2!r}")
    return sqrt_up(2 * Fraction(tau) * Fraction(d))


def intrinsic_exact(tau: float, d: float) -> float:
    """The sharper form tau - tau*sqrt(1 - 2d/tau) (not rounded; for comparisons)."""
    if d > tau / 2:
        raise HypothesisError(f"d={d!r} exceeds tau/2")
    # same value, written as 2d / (1 + sqrt(1 - 2d/tau)) to avoid cancellation for small d
    return 2 * d / (1 + math.sqrt((tau - 2 * d) / tau))  # tau - 2d is exact near tau/2


def intrinsic_from_extrinsic_linear(tau: float, d: float) -> float:
    """Intrinsic distance bound 2d for points at extrinsic distance d < tau/2."""
    if not (tau > 0 and d >= 0):
        raise HypothesisError("need tau > 0 and d >= 0")
    if not Fraction(d) < Fraction(tau) / 2:
        raise HypothesisError(f"d={d!r} is not below tau/2={tau / 2!r}")
    return 2 * d


# -- covering numbers ---------------------------------------------------------------

def theta(N: int) -> float:
    """N log N + N log log N + 5N with natural logarithms."""
    return N * math.log(N) + N * math.log(math.log(N)) + 5 * N


@dataclass(frozen=True)
class CoveringNumber:
    value: int
    branch: str
    flags: tuple[str, ...] = ()

    def __int__(self) -> int:
        return self.value


def _ceil_up(x: float) -> int:
    # the float formula carries a few ulps of error; step past it before rounding up
    return math.ceil(x * (1 + 8 * 2.0 ** -53))


def covering(T: float, N: int) -> CoveringNumber:
    """Bound on the number of radius-1/2 balls needed to cover a radius-T ball in R^N."""
    if not T > 0.5:
        raise HypothesisError(f"T must exceed 1/2, got {T!r}")
    if N < 2:
        raise HypothesisError("covering bounds need N >= 2")
    flags = ("N=2: the covering theorem is stated for N >= 3",) if N == 2 else ()
    th = theta(N)
    log_n = math.log(N)
    if T >= N / 2:
        return CoveringNumber(_ceil_up(math.e * th * (2 * T) ** N), "T >= N/2", flags)
    if T >= N / (2 * log_n):
        return CoveringNumber(_ceil_up(N * th * (2 * T) ** N), "N/(2 log N) <= T < N/2", flags)
    if N >= 9:
        return CoveringNumber(_ceil_up(_part_two(T, N)), "1/2 < T < N/(2 log N)", flags)
    # no branch covers T: a radius-T ball sits inside the smallest radius that has one
    edge = min(N / (2 * log_n), N / 2)
    inner = covering(edge, N)
    note = f"no branch covers T={T!r}; used the bound at T={edge!r} (balls nest)"
    return CoveringNumber(inner.value, inner.branch + " (monotone extension)", flags + (note,))


def _part_two(T: float, N: int) -> float:
    """Small-radius branch, valid for N >= 9 and 1/2 < T < N/(2 log N)."""
    log_n = math.log(N)
    inner = N * log_n + N * math.log(log_n) + N * math.log(2 * T) + 0.5 * math.log(144 * N)
    return 4 * math.e * (2 * T) ** N * N * math.sqrt(N) / (log_n - 2) * inner


def covering_number(T: float, N: int) -> int:
    return covering(T, N).value


def diameter_upper(K: float, tau: float, N: int) -> tuple[float, str]:
    """Diameter bound for a connected M inside a radius-K ball.

    Returns ``(bound, source)``; ``source`` is ``"covering"`` for
    2 (nu + 1) tau, or ``"NON-PAPER bounding box"`` for the fallback
    2 sqrt(N) K used when K/tau <= 1/2.
    """
    if not (K > 0 and tau > 0):
        raise HypothesisError("K and tau must be positive")
    T = K / tau
    if T <= 0.5:
        return mul_up(2, sqrt_up(N), K), "NON-PAPER bounding box"
    nu = covering_number(T, N)
    return mul_up(2, nu + 1, tau), "covering"


def ricci_lower(n: int, tau: Bound) -> tuple[float, float]:
    """(xi, (n-1) xi) with xi = -(9/2) tau^-2, rounded toward -infinity."""
    if n < 1:
        raise HypothesisError("manifold dimension must be at least 1")
    if tau is Unbounded or tau == math.inf:
        return 0.0, 0.0
    if not tau > 0:
        raise HypothesisError("tau must be positive")
    xi = -mul_up(Fraction(9, 2), 1 / (Fraction(tau) ** 2))
    return xi, (-mul_up(n - 1, -xi) if n > 1 else 0.0)


def lambda1_lower_log(n: int, d: float, xi: float) -> float:
    """Natural log of the lower bound on the first Laplace eigenvalue.

    log of exp(-(1 + sqrt(1 - 4 (n-1)^2 d^2 xi))) / (2 (n-1) d^2), evaluated
    without ever forming the (typically underflowing) bound itself.
    """
    if n < 2:
        raise HypothesisError("the eigenvalue bound needs manifold dimension n >= 2")
    if not d > 0:
        raise HypothesisError("d must be positive")
    if xi > 0:
        raise HypothesisError("xi must be nonpositive")
    m = n - 1
    # sqrt(1 + 4 m^2 d^2 |xi|) with the large term factored out to avoid overflow
    a = 2 * m * d * math.sqrt(-xi)
    root = math.hypot(1.0, a)
    log_den = math.log(2 * m) + 2 * math.log(d)
    # step down a few ulps so the float evaluation errs on the safe side
    val = -(1 + root) - log_den
    return val - 8 * 2.0 ** -53 * abs(val)


@dataclass
class EigenvalueReport:
    n: int
    N: int
    K: float
    tauLower: float
    nu: int
    diameterUpper: float
    ricciLowerCoeff: float
    log_lambda1_lower: float
    xi: float = 0.0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def eigenvalue_report(n: int, N: int, K: float, tau: float) -> EigenvalueReport:
    """Diameter, Ricci and first-eigenvalue bounds for an n-dimensional M in a radius-K ball."""
    T = K / tau
    cov = covering(T, N)
    d = mul_up(2, cov.value + 1, tau)
    xi, ric = ricci_lower(n, tau)
    return EigenvalueReport(
        n=n, N=N, K=K, tauLower=tau, nu=cov.value, diameterUpper=d, ricciLowerCoeff=ric,
        log_lambda1_lower=lambda1_lower_log(n, d, xi), xi=xi, flags=list(cov.flags),
    )


# -- deformation margins -------------------------------------------------------------

@dataclass(frozen=True)
class DeformationMargin:
    deltaMin: float
    xiMin: float

    def admits(self, value_bound: float, grad_bound: float) -> bool:
        """Whether a perturbation P with sup|P| <= value_bound off B and sup|grad P| <= grad_bound on B is allowed."""
        return value_bound <= self.xiMin and grad_bound <= self.deltaMin


def deformation_margin(cert) -> DeformationMargin:
    """Perturbation sizes that keep Z(f + t P) smooth, from a single-function certificate.

    deltaMin is the gradient 2-norm lower bound on B (1-norm bound / sqrt(N));
    xiMin is the lower bound of |f| off B.
    """
    if cert.mode != "single":
        raise HypothesisError("deformation margins are defined for a single function")
    if cert.empty_B:
        raise HypothesisError("the certificate has an empty B: no manifold to deform")
    delta = div_down(cert.grad_l1_lower, sqrt_up(cert.N))
    xi = float(cert.off_zero_lower)
    return DeformationMargin(delta, xi)
