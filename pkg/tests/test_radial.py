import math

import numpy as np
import pytest

from cmastab import radial as rd

P = rd.RadialProfile()  # (3.6, 3.5, 0.1, 2)
P_TEXT = rd.RadialProfile(1.0, 0.5, 0.1, 2)


def along(r, n=2):
    z = np.zeros(np.shape(r) + (n,), complex)
    z[..., 0] = r
    return z


def h_vec(norm, n=2, seed=None):
    if seed is None:
        e = np.zeros(n, complex)
        e[0] = 1
    else:
        rng = np.random.default_rng(seed)
        e = rng.normal(size=n) + 1j * rng.normal(size=n)
        e /= np.linalg.norm(e)
    return norm * e


# --- profile validation ------------------------------------------------------------


def test_validate_profile_examples():
    assert rd.validate_profile(P_TEXT).ok
    bad = rd.validate_profile(rd.RadialProfile(1.0, 1.5, 0.1, 2))
    assert not bad.ok and any("D < B" in v for v in bad.violations)
    bad = rd.validate_profile(rd.RadialProfile(1.0, 0.5, 0.3, 2))
    assert not bad.ok and any("alpha" in v for v in bad.violations)
    bad = rd.validate_profile(rd.RadialProfile(2.0, 0.5, 0.1, 2))
    assert not bad.ok and any("log 2 + D" in v for v in bad.violations)
    assert rd.validate_profile(P).ok
    assert rd.validate_profile(rd.RadialProfile(8.05, 8.0, 0.05, 2)).ok


def test_invalid_profile_rejected_by_distances():
    with pytest.raises(ValueError):
        rd.sup_distance(rd.RadialProfile(1.0, 1.5), h_vec(1e-3))


# --- potentials ----------------------------------------------------------------------


def test_rho_hat_values():
    p = P_TEXT
    assert rd.rho_hat(np.zeros(2, complex), p) == 0.0
    assert rd.rho_hat(along(2.0), p) == pytest.approx(math.log(2) + p.D, abs=1e-15)
    assert rd.rho_hat(along(math.e), p) == pytest.approx(1 + p.D, abs=1e-15)


@pytest.mark.parametrize("p", [P, P_TEXT])
@pytest.mark.parametrize("r0", [1.0, 2.0])
def test_rho_hat_continuous_at_region_boundaries(p, r0):
    rng = np.random.default_rng(3)
    for _ in range(5):
        e = rng.normal(size=2) + 1j * rng.normal(size=2)
        e /= np.linalg.norm(e)
        lo = rd.rho_hat(e * r0 * (1 - 1e-14), p)
        hi = rd.rho_hat(e * r0 * (1 + 1e-14), p)
        assert abs(lo - hi) < 1e-12


@pytest.mark.parametrize("p", [P, P_TEXT])
def test_rho_smooth_exact_branches(p):
    r = np.linspace(1e-6, 0.75, 50)
    np.testing.assert_allclose(rd.rho_smooth_r(r, p), rd.rho_hat_r(r, p), rtol=0, atol=1e-14)
    r = np.linspace(2 + p.smoothing_width, 50, 50)
    np.testing.assert_allclose(rd.rho_smooth_r(r, p), np.log(r) + p.D, rtol=0, atol=1e-14)
    assert p.collar[2] <= 2 + p.smoothing_width


@pytest.mark.parametrize("p", [P, P_TEXT, rd.RadialProfile(8.05, 8.0, 0.05)])
def test_rho_smooth_convex_nondecreasing_in_log_r(p):
    t = np.linspace(-8, 4, 20001)
    g = rd.rho_smooth_r(np.exp(t), p)
    d1 = np.diff(g)
    d2 = np.diff(g, 2)
    assert np.all(d1 >= 0)
    assert np.all(d2 >= -1e-12)
    # analytic derivative agrees with central differences (O(dt^2) truncation in the collar)
    g1 = rd._smooth_profile_t(t, p, 1)
    assert np.max(np.abs(np.gradient(g, t) - g1)[1:-1]) < 1e-4


def test_rho_smooth_logarithmic_growth():
    r = np.geomspace(3, 1e12, 30)
    diff = rd.rho_smooth_r(r, P) - np.log(r)
    assert np.ptp(diff) < 1e-12


@pytest.mark.parametrize("p", [P, P_TEXT])
def test_collar_midpoint_between_branch_values(p):
    r_a, r_c, r_b = p.collar
    assert r_a < r_c < r_b
    a = p.B * r_c ** (2 * p.alpha)
    b = math.log(r_c) + p.D
    rho = float(rd.rho_smooth_r(r_c, p))
    w = p.smoothing_width
    assert max(a, b) <= rho <= max(a, b) + 3 * w / 16 + 1e-14


def test_projective_lift():
    z0 = np.zeros(2, complex)
    assert rd.projective_lift(z0, P) == 0.0
    for hn in (1e-3, 0.01, 0.2):
        h = h_vec(hn, seed=1)
        assert rd.projective_lift(z0, P, h) - rd.projective_lift(z0, P) == pytest.approx(
            P.B * hn ** (2 * P.alpha), rel=1e-13
        )
    rng = np.random.default_rng(5)
    z = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    h = h_vec(0.05, seed=2)
    lhs = rd.projective_lift(z, P, h) - rd.projective_lift(z, P)
    rhs = rd.rho_smooth(z + h, P) - rd.rho_smooth(z, P)
    np.testing.assert_allclose(lhs, rhs, atol=1e-14)


# --- densities ---------------------------------------------------------------------------


def test_density_constant_matches_symbolic_value():
    for n, a in ((2, 0.1), (2, 0.05), (3, 0.1), (4, 0.1)):
        assert rd.calibrate_density_constant(n, a) == pytest.approx(a ** (n + 1), rel=1e-6)


def test_density_constant_smooth_limit():
    # alpha -> 1: |z|^2 has det = 1 and the exponent 2n(alpha - 1) -> 0
    assert rd.calibrate_density_constant(2, 0.999) == pytest.approx(1.0, rel=4e-3)
    assert rd.RadialProfile(1.0, 0.5, 0.999).core_exponent == pytest.approx(0.0, abs=1e-2)


def test_ma_density_homogeneity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z1, z2 = (rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(2))
        z1 *= rng.uniform(1e-4, 0.75) / np.linalg.norm(z1)
        z2 *= rng.uniform(1e-4, 0.75) / np.linalg.norm(z2)
        ratio = rd.ma_density(z1, P) / rd.ma_density(z2, P)
        expect = (np.linalg.norm(z1) / np.linalg.norm(z2)) ** (2 * 2 * (P.alpha - 1))
        assert ratio == pytest.approx(expect, rel=1e-13)


def test_ma_density_domain():
    with pytest.raises(ValueError):
        rd.ma_density(np.zeros(2, complex), P)
    with pytest.raises(ValueError):
        rd.ma_density(along(0.9), P)


@pytest.mark.parametrize("r", [0.3, 0.7, 1.25, 1.5, 1.8])
def test_radial_density_matches_finite_difference_hessian(r):
    # independent oracle: determinant of a numerical complex Hessian of the potential
    z0 = np.array([0.6, 0.8j]) * r
    H = rd.complex_hessian_at(lambda z: rd.rho_smooth(z, P), z0, 1e-4)
    assert np.allclose(H, H.conj().T, atol=1e-9)
    fd = np.linalg.det(H).real
    assert fd == pytest.approx(float(rd._density_r(r, P)), rel=2e-5)


def test_core_building_block_against_monte_carlo():
    n, a = 2, 0.1
    beta = 2 * n * (a - 1)
    exact = rd.sphere_area(2 * n - 1) / (2 * n * a)
    assert exact == pytest.approx(2 * math.pi**2 / 0.4, rel=1e-15)
    assert exact == pytest.approx(49.348, abs=1e-3)
    # quadrature route
    val, _ = rd.radial_angular_integral(lambda r, r2: r**beta + 0 * r2, n, 0.0, 1.0, 0.0)
    assert val == pytest.approx(exact, rel=1e-10)
    # Monte Carlo in R^4 with radial importance density q(r) = r^{-1/2}/2
    rng = np.random.default_rng(2024)
    m = 400_000
    u = rng.normal(size=(m, 4))
    u /= np.linalg.norm(u, axis=1)[:, None]
    z = u * (rng.random(m) ** 2)[:, None]
    rz = np.linalg.norm(z, axis=1)
    w = rz**beta * rd.sphere_area(3) * rz**3 / (0.5 * rz**-0.5)
    assert w.mean() == pytest.approx(exact, rel=5e-3)


def test_core_difference_integral_matches_radial_angular_route():
    beta = P.core_exponent
    j, err = rd.core_difference_integral(beta, 2, 40.0)
    j2 = rd.core_difference_integral(beta, 2, 2.0)[0]
    val, _ = rd.radial_angular_integral(
        lambda r, r2: np.abs(r**beta - r2**beta), 2, 2.0, 40.0, 1.0, epsrel=1e-10
    )
    assert j - j2 == pytest.approx(val, rel=1e-4)


# --- distances ---------------------------------------------------------------------------


def test_zero_translation():
    z = np.zeros(2, complex)
    assert rd.sup_distance(P, z) == 0.0
    assert float(rd.l1_ma_distance(P, z)) == 0.0


def test_translation_must_be_small():
    with pytest.raises(ValueError):
        rd.sup_distance(P, h_vec(0.3))
    with pytest.raises(ValueError):
        rd.l1_ma_distance(P, h_vec(0.25))


@pytest.mark.parametrize("hn", [1e-3, 1e-2, 0.1])
def test_sup_distance_origin_witness(hn):
    d, z = rd.sup_distance(P, h_vec(hn, seed=4), full=True)
    assert d >= P.B * hn ** (2 * P.alpha) * (1 - 1e-13)
    # near the origin the maximum sits at the origin itself
    if hn <= 1e-2:
        assert d == pytest.approx(P.B * hn ** (2 * P.alpha), rel=1e-9)


def test_l1_pieces_and_bounds():
    hn = 3e-3
    d = rd.l1_ma_distance(P, h_vec(hn), check=True)
    assert d.value == pytest.approx(d.inner + d.middle + d.outer, rel=1e-14)
    assert d.middle == pytest.approx(d.middle_check, rel=1e-4)
    assert 0 < d.inner <= d.inner_majorant
    assert 0 <= d.outer <= d.outer_bound * 1.01
    assert d.error < 1e-6 * d.value


def test_distances_depend_only_on_norm():
    hn = 2e-3
    sups, l1s = [], []
    for seed in (None, 11, 12, 13):
        h = h_vec(hn, seed=seed)
        sups.append(rd.sup_distance(P, h))
        l1s.append(float(rd.l1_ma_distance(P, h)))
    assert np.ptp(sups) / np.mean(sups) < 0.01
    assert np.ptp(l1s) / np.mean(l1s) < 0.01


def test_distances_monotone_in_h():
    norms = np.geomspace(1e-3, 5e-2, 6)
    sups = [rd.sup_distance(P, h_vec(x)) for x in norms]
    l1s = [float(rd.l1_ma_distance(P, h_vec(x))) for x in norms]
    assert np.all(np.diff(sups) > 0)
    assert np.all(np.diff(l1s) > 0)


# --- sharpness report ------------------------------------------------------------------------


def test_synthetic_power_laws_give_ratio_n():
    for n, a in ((2, 0.1), (3, 0.05)):
        norms = np.geomspace(1e-3, 1e-2, 5)
        p = rd.RadialProfile(1.0, 0.5, a, n) if n == 2 else rd.RadialProfile(4.0, 3.9, a, n)
        rep = rd.sharpness_from_distances(p, norms, norms ** (2 * a), norms ** (2 * n * a))
        assert rep.ratio == pytest.approx(n, rel=1e-12)
        assert rep.conclusive


def test_report_needs_enough_samples():
    with pytest.raises(ValueError):
        rd.sharpness_report(P, rd.h_schedule(2, 3))


def test_sharpness_ratio_independent_of_alpha():
    p = rd.RadialProfile(8.05, 8.0, 0.05, 2)
    rep = rd.sharpness_report(p)
    assert rep.fit_sup.slope == pytest.approx(0.1, rel=0.05)
    assert rep.fit_l1.slope == pytest.approx(0.2, rel=0.10)
    assert rep.ratio == pytest.approx(2.0, rel=0.10)


def test_text_constants_reach_core_slope_only_at_tiny_h():
    # with (B, D) = (1, 0.5) the smoothing collar dominates near |h| ~ 1e-3;
    # the core scaling |h|^{2 n alpha} takes over by |h| ~ 1e-8
    hs = rd.h_schedule(2, 5, start=-8.0)
    rep = rd.sharpness_report(P_TEXT, hs)
    assert rep.fit_sup.slope == pytest.approx(0.2, rel=0.05)
    assert rep.fit_l1.slope == pytest.approx(0.4, rel=0.05)
    assert rep.fit_core.slope == pytest.approx(0.4, rel=0.05)


def test_h_schedule():
    hs = rd.h_schedule(2)
    norms = [np.linalg.norm(h) for h in hs]
    np.testing.assert_allclose(norms, 10.0 ** (-3 + np.arange(5) / 4), rtol=1e-14)
    hs = rd.h_schedule(3, 4, seed=1)
    assert all(h.shape == (3,) for h in hs)

