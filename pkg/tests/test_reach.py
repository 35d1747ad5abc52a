import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from reachcert import reach
from reachcert.reach import Unbounded

from oracles import frame_with_gram, random_spd

pos = st.floats(1e-3, 1e3)


def test_single_bound_value():
    # 0.3535 / (2 * sqrt(2) * 2)
    r = reach.reach_lower_single(2.0, 0.3535, 2)
    assert r.tau_lower == pytest.approx(0.3535 / (4 * math.sqrt(2)), rel=1e-15)
    assert r.tau_lower == pytest.approx(0.06249056, abs=5e-9)
    assert r.tau_lower == r.bottleneck_half_lower < r.curvature_radius_lower


@given(pos, pos, st.integers(1, 12))
def test_single_bound_is_rounded_down(C1, C2, N):
    t = Fraction(reach.reach_lower_single(C1, C2, N).tau_lower)
    # t <= C2 / (2 sqrt(N) C1)  <=>  (2 t C1)^2 N <= C2^2
    assert (2 * t * Fraction(C1)) ** 2 * N <= Fraction(C2) ** 2
    assert float(t) == pytest.approx(C2 / (2 * math.sqrt(N) * C1), rel=1e-14)


@given(pos, pos, st.integers(1, 6))
def test_single_monotone_and_ulp_stable(C1, C2, N):
    base = reach.reach_lower_single(C1, C2, N).tau_lower
    assert reach.reach_lower_single(math.nextafter(C1, math.inf), C2, N).tau_lower <= base
    assert reach.reach_lower_single(C1, math.nextafter(C2, 0), N).tau_lower <= base
    assert reach.reach_lower_single(C1, 2 * C2, N).tau_lower >= base


def test_input_validation():
    with pytest.raises(ValueError):
        reach.reach_lower_single(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        reach.reach_lower_system(1.0, 0.0, 1.0, 1.0, 2)
    with pytest.raises(ValueError):
        reach.sqrt_inv_entry_bound(1.0, -1.0, 2)
    with pytest.raises(ValueError):
        reach.ReachCertificate(1.0, 2.0, 3.0)


def test_unbounded_sentinel():
    assert reach.bmin(Unbounded, 3.0) == 3.0
    assert reach.as_float(Unbounded) == math.inf
    r = reach.reach_lower_system(2.0, 1.0, 0.0, 1.0, 2)
    assert r.tau_lower is Unbounded
    assert reach.second_ff_bound_system(2.0, 1.0, 2, [0.0, 0.0]) == (0.0, Unbounded)
    import pickle

    assert pickle.loads(pickle.dumps(Unbounded)) is Unbounded


def test_frozen_ladder_values():
    # hand-evaluated from the closed forms
    assert reach.sqrt_inv_entry_bound(1, 1, 2) == pytest.approx(2 ** 2.25, rel=1e-15)
    assert reach.norm_equiv_C4(1, 1, 2) == pytest.approx(2 ** 4.25, rel=1e-15)
    kappa, rad = reach.second_ff_bound_system(5, 4, 2, [2, 0])
    assert kappa == pytest.approx(2 ** 3.25 * math.sqrt(5) / 2 * 2, rel=1e-15)
    assert rad == pytest.approx(1 / kappa, rel=1e-15)
    b = reach.bottleneck_bound_system(19.03, 1, 2, 5.66)
    assert b == pytest.approx(1 / (2 * 19.03 * 2 * (5.66 * 19.03 + 1)), rel=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_sqrt_inverse_entries_bounded(k):
    rng = np.random.default_rng(k)
    for _ in range(200):
        g = random_spd(rng, k, cond=10 ** rng.uniform(0, 3))
        root = scipy.linalg.sqrtm(np.linalg.inv(g)).real
        n1 = np.abs(g).sum(axis=0).max()
        bound = reach.sqrt_inv_entry_bound(n1, np.linalg.det(g), k)
        assert np.abs(root).max() <= bound * (1 + 1e-12)  # k = 1 is tight


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_orthonormalize_gram(k):
    rng = np.random.default_rng(10 + k)
    for _ in range(50):
        g = random_spd(rng, k)
        U = frame_with_gram(rng, g, k + 3)
        E = reach.orthonormalize_gram(g) @ U
        assert np.allclose(E @ E.T, np.eye(k), atol=1e-8)


def test_orthonormalize_rejects_bad_input():
    with pytest.raises(reach.NotPositiveDefinite):
        reach.orthonormalize_gram([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(reach.NotPositiveDefinite):
        reach.orthonormalize_gram([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(reach.NotPositiveDefinite):
        reach.orthonormalize_gram([[1.0, 0.0, 0.0]])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_norm_equivalence_constant(k):
    # for x = sum a_i u_i:  |a|_1 <= C4 |x|_2
    rng = np.random.default_rng(20 + k)
    for _ in range(200):
        g = random_spd(rng, k, cond=10 ** rng.uniform(0, 3))
        U = frame_with_gram(rng, g, k + 2)
        c4 = reach.norm_equiv_C4(np.abs(g).sum(axis=0).max(), np.linalg.det(g), k)
        a = rng.normal(size=k)
        assert np.abs(a).sum() <= c4 * np.linalg.norm(a @ U) * (1 + 1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_curvature_bound_dominates_normal_curvature(k):
    # normal curvature along a unit tangent v is sqrt(h^T g^-1 h) with h_j = v^T H_j v
    rng = np.random.default_rng(30 + k)
    N = k + 2
    for _ in range(200):
        g = random_spd(rng, k, cond=10 ** rng.uniform(0, 2))
        U = frame_with_gram(rng, g, N)
        Hs = []
        for _ in range(k):
            A = rng.normal(size=(N, N))
            Hs.append((A + A.T) / 2)
        norms = [np.linalg.norm(H, 2) for H in Hs]
        kappa, _ = reach.second_ff_bound_system(np.abs(g).sum(axis=0).max(), np.linalg.det(g), k, norms)
        q, _ = np.linalg.qr(U.T, mode="complete")
        tangent = q[:, k:]
        for _ in range(5):
            v = tangent @ rng.normal(size=N - k)
            v /= np.linalg.norm(v)
            h = np.array([v @ H @ v for H in Hs])
            assert math.sqrt(h @ np.linalg.solve(g, h)) <= kappa * (1 + 1e-12)


@given(st.floats(0.5, 50), st.floats(1e-3, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(1, 4))
def test_system_bound_monotone(C5, C6, C7, C8, k):
    base = reach.reach_lower_system(C5, C6, C7, C8, k).tau_lower
    assert reach.reach_lower_system(C5, 2 * C6, C7, C8, k).tau_lower >= base
    assert reach.reach_lower_system(2 * C5, C6, C7, C8, k).tau_lower <= base
    assert reach.reach_lower_system(C5, C6, 2 * C7, C8, k).tau_lower <= base
    assert reach.reach_lower_system(C5, C6, C7, 2 * C8, k).tau_lower <= base
    assert reach.reach_lower_system(C5, math.nextafter(C6, 0), C7, C8, k).tau_lower <= base


def test_circle_chain(circle_cert):
    r = reach.reach_from_certificate(circle_cert)
    assert r.provenance == "single-function"
    assert 0 < r.tau_lower <= 1.0  # the unit circle has reach 1
    assert r.tau_lower == reach.reach_lower_single(2.0, circle_cert.grad_l1_lower, 2).tau_lower


def test_system_chain_on_equator(equator_cert):
    r = reach.reach_from_certificate(equator_cert)
    assert r.provenance == "system"
    assert 0 < r.tau_lower <= 1.0
    assert r.inputs["C5"] == reach.gram_norm1_bound(2, equator_cert.M2)


def test_k1_system_ladder_is_more_conservative(circle_cert):
    c = reach.system_constants_single(circle_cert)
    sys_tau = reach.reach_lower_system(c["C5"], c["C6"], c["C7"], c["C8"], 1).tau_lower
    assert 0 < sys_tau <= reach.reach_from_certificate(circle_cert).tau_lower
