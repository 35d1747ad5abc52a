"""Lower bounds for the reach from certified derivative bounds.

All bounds are rounded toward zero (in the safe direction) using exact
rational arithmetic and a single final rounding per quantity.  Fractional
powers that appear are multiples of 1/4 and go through
:func:`reachcert.rounding.qpow_up` / ``qpow_down``.

Constants of the multi-function ladder:

=====  ==========================================================
C4     norm-equivalence constant for the frame of gradients
C5     upper bound on the matrix 1-norm of the Gram matrix g
C6     lower bound on det g over the zero set
C7     upper bound on the spectral norm of every Hess f_i
C8     upper bound on every |grad f_i|_2
=====  ==========================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from .rounding import div_down, div_up, mul_down, mul_up, qpow_down, qpow_up, sqrt_down, sqrt_up


class _Unbounded:
    """Marker for a bound that is +infinity (e.g. the curvature radius of a flat piece)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unbounded"

    def __reduce__(self):
        return (_Unbounded, ())


Unbounded = _Unbounded()
Bound = Union[float, _Unbounded]


def bmin(a: Bound, b: Bound) -> Bound:
    if a is Unbounded:
        return b
    if b is Unbounded:
        return a
    return min(a, b)


def as_float(b: Bound) -> float:
    return math.inf if b is Unbounded else float(b)


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class ReachCertificate:
    tau_lower: Bound
    curvature_radius_lower: Bound
    bottleneck_half_lower: Bound
    inputs: dict = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        if self.tau_lower != bmin(self.curvature_radius_lower, self.bottleneck_half_lower):
            raise ValueError("tau_lower must equal min(curvature radius, bottleneck half)")
        for v in (self.tau_lower, self.curvature_radius_lower, self.bottleneck_half_lower):
            if v is not Unbounded and not v >= 0:
                raise ValueError("reach bounds must be nonnegative")


def _positive(name: str, v: float, allow_zero: bool = False) -> None:
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'} and finite, got {v!r}")


# -- one function -------------------------------------------------------------

def reach_lower_single(C1: float, C2: float, N: int, provenance: str = "") -> ReachCertificate:
    """Reach bound from ``|Hess f|_2 <= C1`` on a convex set and ``|grad f|_1 >= C2`` on M.

    The 1-norm bound is turned into a 2-norm bound by dividing by sqrt(N); the
    curvature radius is at least C2/(sqrt(N) C1) and the smallest bottleneck
    at least the same quantity, so half of it bounds the reach.
    """
    _positive("C1", C1)
    _positive("C2", C2, allow_zero=True)
    den = Fraction(sqrt_up(N)) * Fraction(C1)
    rho = div_down(C2, den)
    eta = div_down(C2, 2 * den)
    return ReachCertificate(
        tau_lower=min(rho, eta),
        curvature_radius_lower=rho,
        bottleneck_half_lower=eta,
        inputs={"C1": C1, "C2": C2, "N": N},
        provenance=provenance,
    )


def bottleneck_bound_single(C1: float, C2: float, N: int) -> float:
    """Smallest-bottleneck lower bound (|grad f|_2 lower bound)/(Hess bound)."""
    _positive("C1", C1)
    return div_down(C2, Fraction(sqrt_up(N)) * Fraction(C1))


# -- systems ------------------------------------------------------------------

def orthonormalize_gram(g) -> np.ndarray:
    """The symmetric positive definite square root of ``g^-1``.

    If the rows of U have Gram matrix g, the rows of ``orthonormalize_gram(g) @ U``
    are orthonormal.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise NotPositiveDefinite("Gram matrix must be square")
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14 * max(1.0, float(np.abs(g).max(initial=0)))):
        raise NotPositiveDefinite("Gram matrix must be symmetric")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Gram matrix is not positive definite") from None
    w, v = np.linalg.eigh((g + g.T) / 2)
    if np.any(w <= 0):
        raise NotPositiveDefinite("Gram matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.T


def _check_det(det_g: float) -> None:
    if not (math.isfinite(det_g) and det_g > 0):
        raise ValueError(f"determinant must be positive, got {det_g!r}")


def sqrt_inv_entry_bound(norm1_g: float, det_g: float, d: int) -> float:
    """Upper bound on the entries of sqrt(g^-1) for a d x d positive definite g.

    d^(2+(d-1)/4) * |g|_1^((d-1)/2) / det(g)^(1/2), rounded up.
    """
    _check_det(det_g)
    _positive("norm1_g", norm1_g)
    return mul_up(qpow_up(d, d + 7), qpow_up(norm1_g, 2 * (d - 1)), qpow_up(det_g, -2))


def second_ff_bound_system(norm1_g: float, det_g: float, k: int, hess_bounds) -> tuple[float, Bound]:
    """Curvature bound for Z(f_1..f_k) and the matching radius.

    kappa = k^(3+(k-1)/4) |g|_1^((k-1)/2) det(g)^(-1/2) sum_i hess_bounds[i];
    returns ``(kappa, 1/kappa)``, the radius being ``Unbounded`` when kappa = 0.
    """
    _check_det(det_g)
    _positive("norm1_g", norm1_g)
    if k < 1:
        raise ValueError("k must be at least 1")
    hsum = Fraction(0)
    for h in hess_bounds:
        _positive("Hessian bound", h, allow_zero=True)
        hsum += Fraction(h)
    if hsum == 0:
        return 0.0, Unbounded
    kappa = mul_up(qpow_up(k, k + 11), qpow_up(norm1_g, 2 * (k - 1)), qpow_up(det_g, -2), hsum)
    # 1/kappa from the exact product would be slightly larger; rounding kappa up keeps it safe
    return kappa, div_down(1, kappa)


def norm_equiv_C4(norm1_g: float, det_g: float, d: int) -> float:
    """d^(4+(d-1)/4) |g|_1^((d-1)/2) / det(g)^(1/2), rounded up."""
    _check_det(det_g)
    _positive("norm1_g", norm1_g)
    return mul_up(qpow_up(d, d + 15), qpow_up(norm1_g, 2 * (d - 1)), qpow_up(det_g, -2))


def bottleneck_bound_system(C4: float, k: int, K: float, m: float) -> float:
    """Smallest-bottleneck lower bound 1/(2 C4 k K (m C4 k + 1)), rounded down."""
    for name, v in (("C4", C4), ("k", k), ("K", K), ("m", m)):
        _positive(name, v)
    c4, kk = Fraction(C4), Fraction(k)
    return div_down(1, 2 * c4 * kk * Fraction(K) * (Fraction(m) * c4 * kk + 1))


def reach_lower_system(C5: float, C6: float, C7: float, C8: float, k: int,
                       C4: float | None = None, provenance: str = "") -> ReachCertificate:
    """Reach bound for a system of k functions.

    tau >= min{ k^(-4-(k-1)/4) C6^(1/2) / (C5^((k-1)/2) C7),
                (1/2) / (2 k C7 C4 (C8 C4 k + 1)) }

    ``C4`` defaults to :func:`norm_equiv_C4` evaluated with the Gram size k.
    """
    _check_det(C6)
    _positive("C5", C5)
    _positive("C7", C7, allow_zero=True)
    _positive("C8", C8)
    if C4 is None:
        C4 = norm_equiv_C4(C5, C6, k)
    inputs = {"C4": C4, "C5": C5, "C6": C6, "C7": C7, "C8": C8, "k": k}
    if C7 == 0:
        return ReachCertificate(Unbounded, Unbounded, Unbounded, inputs, provenance)
    num = qpow_down(C6, 2)
    den = mul_up(qpow_up(k, k + 15), qpow_up(C5, 2 * (k - 1)), C7)
    rho = div_down(num, den)
    eta = div_down(bottleneck_bound_system(C4, k, C7, C8), 2)
    return ReachCertificate(min(rho, eta), rho, eta, inputs, provenance)


def gram_norm1_bound(k: int, M2: float) -> float:
    """|g|_1 <= k * M2^2, since |<grad f_i, grad f_j>| <= M2^2."""
    return mul_up(k, M2, M2)


def reach_from_certificate(cert) -> ReachCertificate:
    """Chain a subdivision certificate into a reach bound.

    Single-function certificates use the direct bound with C1 = M3 and
    C2 = the certified gradient 1-norm bound; systems use the multi-function
    ladder with C5 = k M2^2, C6 = the certified det g bound, C7 = M3, C8 = M2.
    """
    if cert.empty_B:
        raise ValueError("the certificate has an empty B: there is no manifold")
    if cert.mode == "single":
        return reach_lower_single(cert.M3, cert.grad_l1_lower, cert.N, provenance="single-function")
    C5 = gram_norm1_bound(cert.k, cert.M2)
    return reach_lower_system(C5, cert.det_g_lower, cert.M3, cert.M2, cert.k, provenance="system")


def system_constants_single(cert) -> dict:
    """Multi-function ladder constants for a k = 1 certificate (for cross-checks)."""
    l2 = div_down(cert.grad_l1_lower, sqrt_up(cert.N))
    return {"C5": mul_up(cert.M2, cert.M2), "C6": mul_down(l2, l2), "C7": cert.M3, "C8": cert.M2, "k": 1}


__all__ = [
    "Bound",
    "NotPositiveDefinite",
    "ReachCertificate",
    "Unbounded",
    "as_float",
    "bmin",
    "bottleneck_bound_single",
    "bottleneck_bound_system",
    "gram_norm1_bound",
    "norm_equiv_C4",
    "orthonormalize_gram",
    "reach_from_certificate",
    "reach_lower_single",
    "reach_lower_system",
    "second_ff_bound_system",
    "sqrt_inv_entry_bound",
    "system_constants_single",
]
