"""Radial sharpness example.

A psh potential on C^n that behaves like ``B |z|^(2 alpha)`` near the origin
and like ``log|z| + D`` at infinity.  Translating it by a small vector ``h``
moves the potential by ``B |h|^(2 alpha)`` in sup norm while its Monge-Ampere
measure moves by ``O(|h|^(2 n alpha))`` in L^1, so no stability exponent
better than ``1/n`` is possible.

Conventions: points of C^n are complex arrays with last axis of length n.
Monge-Ampere densities are ``det[d^2 u / dz_j dzbar_k]`` against Lebesgue
measure on R^{2n}; for a radial ``u = g(log r)`` this is
``g'^{n-1} g'' / (2^{n+1} r^{2n})``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .fitting import ExponentFit, fit_power_law

log = logging.getLogger(__name__)

ANGULAR_NODES = 64
DEFAULT_WIDTH = 0.05


def sphere_area(k: int) -> float:
    """Area of the unit sphere S^k in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class ProfileCheck:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class RadialProfile:
    """Constants of the example potential.

    The defaults put the two branches close to tangency so the smoothing
    collar carries little Monge-Ampere mass; then the ``|h|^{2n alpha}``
    core term dominates the L^1 distance already for |h| ~ 1e-3.
    """

    B: float = 3.6
    D: float = 3.5
    alpha: float = 0.1
    n: int = 2
    smoothing_width: float = DEFAULT_WIDTH

    # --- branches in t = log r -------------------------------------------
    def _a(self, t):
        return self.B * np.exp(2 * self.alpha * t)

    def _b(self, t):
        return t + self.D

    def _gap(self, t):
        return self._a(t) - self._b(t)

    @cached_property
    def _t_gap_min(self) -> float:
        # argmin of a - b: 2 alpha B e^{2 alpha t} = 1
        return math.log(1.0 / (2 * self.alpha * self.B)) / (2 * self.alpha)

    def _root_of_gap(self, level):
        # a - b is decreasing on (-inf, t_gap_min]
        lo, hi = -50.0, self._t_gap_min
        return optimize.brentq(lambda t: self._gap(t) - level, lo, hi, xtol=1e-15, rtol=1e-15)

    @cached_property
    def collar(self) -> tuple[float, float, float]:
        """Radii (r_a, r_cross, r_b): smoothing starts, branches cross, smoothing ends."""
        w = self.smoothing_width
        return (
            math.exp(self._root_of_gap(w)),
            math.exp(self._root_of_gap(0.0)),
            math.exp(self._root_of_gap(-w)),
        )

    @cached_property
    def density_constant(self) -> float:
        """c(n, alpha) in MA(B|z|^{2alpha}) = c B^n |z|^{2n(alpha-1)}, by finite differences."""
        return calibrate_density_constant(self.n, self.alpha)

    @property
    def core_exponent(self) -> float:
        """Power of |z| in the core Monge-Ampere density, 2n(alpha - 1)."""
        return 2 * self.n * (self.alpha - 1.0)


def validate_profile(p: RadialProfile) -> ProfileCheck:
    """Check the constant constraints, naming each violated inequality."""
    bad = []
    n = p.n
    if int(n) != n or n < 2:
        bad.append(f"n >= 2 integer (got {n})")
    if not (p.B > 0 and p.D > 0):
        bad.append("B > 0 and D > 0")
    if not p.D < p.B:
        bad.append(f"D < B ({p.D} >= {p.B})")
    if not p.B * 2 ** (2 * p.alpha) < math.log(2) + p.D:
        bad.append(
            f"B 2^(2 alpha) < log 2 + D ({p.B * 2 ** (2 * p.alpha):.6g} >= {math.log(2) + p.D:.6g})"
        )
    if not 0 < p.alpha < 1 / (2 * n):
        bad.append(f"0 < alpha < 1/(2n) (alpha={p.alpha}, 1/(2n)={1 / (2 * n):.6g})")
    if not p.smoothing_width > 0:
        bad.append("smoothing_width > 0")
    if not bad:
        w = p.smoothing_width
        if p._gap(math.log(0.75)) < w:
            bad.append("smoothing collar reaches |z| <= 3/4")
        elif p._gap(p._t_gap_min) > -w:
            bad.append("branches never separate by the smoothing width")
    return ProfileCheck(not bad, tuple(bad))


def _require_valid(p):
    check = validate_profile(p)
    if not check:
        raise ValueError("invalid radial profile: " + "; ".join(check.violations))


def _norm(z):
    z = np.asarray(z)
    return np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))


# --- potentials ---------------------------------------------------------------


def rho_hat_r(r, p: RadialProfile):
    """The unsmoothed profile as a function of r = |z|."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        a = p.B * r ** (2 * p.alpha)
        b = np.log(r) + p.D
    return np.where(r <= 1.0, a, np.where(r >= 2.0, b, np.maximum(a, b)))


def rho_hat(z, p: RadialProfile):
    return rho_hat_r(_norm(z), p)


# Smooth convex replacement for |x| that equals |x| for |x| >= w:
# k(x) = 3w/8 + 3x^2/(4w) - x^4/(8w^3) inside; C^2 at |x| = w.
def _k(x, w):
    ax = np.abs(x)
    inner = 3 * w / 8 + 3 * x**2 / (4 * w) - x**4 / (8 * w**3)
    return np.where(ax >= w, ax, inner)


def _k1(x, w):
    inner = 3 * x / (2 * w) - x**3 / (2 * w**3)
    return np.where(np.abs(x) >= w, np.sign(x), inner)


def _k2(x, w):
    inner = 3 / (2 * w) - 3 * x**2 / (2 * w**3)
    return np.where(np.abs(x) >= w, 0.0, inner)


def _smooth_profile_t(t, p: RadialProfile, order: int = 0):
    """rho(e^t) and its t-derivatives up to second order."""
    t = np.asarray(t, dtype=float)
    w = p.smoothing_width
    t_b = math.log(p.collar[2])
    two_a = 2 * p.alpha
    a = p._a(t)
    d = a - (t + p.D)
    beyond = t >= t_b
    if order == 0:
        val = 0.5 * (a + t + p.D) + 0.5 * _k(d, w)
        return np.where(beyond, t + p.D, val)
    a1 = two_a * a
    d1 = a1 - 1.0
    if order == 1:
        val = 0.5 * (a1 + 1.0) + 0.5 * _k1(d, w) * d1
        return np.where(beyond, 1.0, val)
    a2 = two_a * a1
    val = 0.5 * a2 + 0.5 * (_k2(d, w) * d1**2 + _k1(d, w) * a2)
    return np.where(beyond, 0.0, val)


def rho_smooth_r(r, p: RadialProfile):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        t = np.log(r)
    out = _smooth_profile_t(np.where(r > 0, t, 0.0), p)
    return np.where(r > 0, out, 0.0)


def rho_smooth(z, p: RadialProfile):
    """Smoothed potential: exactly B|z|^{2alpha} up to the collar start, log|z| + D after it."""
    return rho_smooth_r(_norm(z), p)


def projective_lift(z_affine, p: RadialProfile, h=None):
    """rho(z + h) - log(1 + |z|^2)/2 in the affine chart of P^n."""
    z = np.asarray(z_affine, dtype=complex)
    shifted = z if h is None else z + np.asarray(h, dtype=complex)
    return rho_smooth(shifted, p) - 0.5 * np.log1p(_norm(z) ** 2)


# --- Monge-Ampere densities ------------------------------------------------


def _density_r(r, p: RadialProfile):
    """Radial MA density of rho_smooth at radius r > 0 (any region)."""
    r = np.asarray(r, dtype=float)
    t = np.log(r)
    g1 = _smooth_profile_t(t, p, 1)
    g2 = _smooth_profile_t(t, p, 2)
    n = p.n
    exact = g1 ** (n - 1) * g2 / (2.0 ** (n + 1) * r ** (2 * n))
    # rescale to the calibrated normalization of the core
    return exact * (p.density_constant / p.alpha ** (n + 1))


def ma_density(z, p: RadialProfile):
    """c(n, alpha) B^n |z|^{2n(alpha-1)} on the core 0 < |z| <= 3/4."""
    r = _norm(z)
    if np.any(r <= 0):
        raise ValueError("Monge-Ampere density is singular at z = 0")
    if np.any(r > 0.75):
        raise ValueError("closed-form density only holds for |z| <= 3/4")
    return p.density_constant * p.B**p.n * r**p.core_exponent


def complex_hessian_at(fun, z0, step: float) -> np.ndarray:
    """Central-difference complex Hessian d^2 u/dz_j dzbar_k of ``fun`` at z0."""
    z0 = np.asarray(z0, dtype=complex)
    n = z0.size
    x0 = np.concatenate([z0.real, z0.imag])  # x_1..x_n, y_1..y_n
    dim = 2 * n
    f = lambda x: float(fun(x[:n] + 1j * x[n:]))
    R = np.empty((dim, dim))
    f0 = f(x0)
    E = np.eye(dim) * step
    for a in range(dim):
        R[a, a] = (f(x0 + E[a]) - 2 * f0 + f(x0 - E[a])) / step**2
        for b in range(a + 1, dim):
            R[a, b] = R[b, a] = (
                f(x0 + E[a] + E[b]) - f(x0 + E[a] - E[b]) - f(x0 - E[a] + E[b]) + f(x0 - E[a] - E[b])
            ) / (4 * step**2)
    xx, yy, xy = R[:n, :n], R[n:, n:], R[:n, n:]
    # d_j dbar_k = (dxj dxk + dyj dyk + i (dxj dyk - dyj dxk)) / 4
    return 0.25 * ((xx + yy) + 1j * (xy - xy.T))


@lru_cache(maxsize=None)
def calibrate_density_constant(n: int, alpha: float) -> float:
    """Finite-difference calibration of c(n, alpha), Richardson-extrapolated in the step."""
    rng = np.random.default_rng(12345)
    z0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    z0 *= 0.5 / np.linalg.norm(z0)
    u = lambda z: np.sum(np.abs(z) ** 2) ** alpha
    scale = 0.5 ** (2 * n * (alpha - 1))
    steps = [4e-3, 2e-3, 1e-3]
    vals = [np.linalg.det(complex_hessian_at(u, z0, s)).real / scale for s in steps]
    # error ~ c2 h^2 + c4 h^4
    r1 = (4 * vals[1] - vals[0]) / 3
    r2 = (4 * vals[2] - vals[1]) / 3
    return float((16 * r2 - r1) / 15)


# --- distances --------------------------------------------------------------


def _as_translation(h, n):
    h = np.asarray(h, dtype=complex).reshape(-1)
    if h.size != n:
        raise ValueError(f"translation must have {n} complex components")
    return h


def _orthonormal_partner(h):
    """A unit vector in C^n = R^{2n} orthogonal (real inner product) to h."""
    v = np.zeros_like(h)
    hn = h / np.linalg.norm(h)
    # multiplying by i gives a real-orthogonal direction
    v = 1j * hn
    return v


def sup_distance(p: RadialProfile, h, *, full: bool = False, seed: int = 0):
    """sup_z |rho_bar_h - rho_bar| = sup_z |rho(z + h) - rho(z)|.

    Dense radial-angular sampling, golden-section refinement on the line
    through 0 and -h, and Nelder-Mead restarts from the best samples.
    """
    _require_valid(p)
    h = _as_translation(h, p.n)
    hn = float(np.linalg.norm(h))
    if hn >= 0.25:
        raise ValueError("sup_distance needs |h| < 1/4")
    if hn == 0:
        return (0.0, np.zeros(p.n, complex)) if full else 0.0
    e = h / hn
    v = _orthonormal_partner(h)

    def diff_rt(r, th):
        z = r * (np.cos(th) * e + np.sin(th) * v)
        return rho_smooth(z + h, p) - rho_smooth(z, p)

    radii = np.concatenate([[0.0], np.geomspace(hn * 1e-3, 4.0, 400)])
    thetas = np.linspace(0.0, np.pi, 65)
    R, T = np.meshgrid(radii, thetas, indexing="ij")
    Z = R[..., None] * (np.cos(T)[..., None] * e + np.sin(T)[..., None] * v)
    vals = np.abs(rho_smooth(Z + h, p) - rho_smooth(Z, p))
    best = float(vals.max())
    flat = np.argsort(vals, axis=None)[::-1][:5]
    best_z = Z.reshape(-1, p.n)[flat[0]]

    # line z = tau h
    line = lambda tau: -abs(rho_smooth((tau + 1.0) * h, p) - rho_smooth(tau * h, p))
    for bracket in ((-2.0, -0.6, 0.0), (-1.0, -0.4, 1.0)):
        try:
            res = optimize.minimize_scalar(line, bracket=bracket, method="golden", tol=1e-10)
        except ValueError:
            continue
        if -res.fun > best:
            best, best_z = float(-res.fun), res.x * h

    rng = np.random.default_rng(seed)
    starts = [(R.flat[i], T.flat[i]) for i in flat]
    starts += [(rng.uniform(0, 2.5), rng.uniform(0, np.pi)) for _ in range(4)]
    for r0, t0 in starts:
        res = optimize.minimize(
            lambda x: -abs(diff_rt(abs(x[0]), x[1])),
            x0=[r0, t0],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400},
        )
        if -res.fun > best:
            r, th = abs(res.x[0]), res.x[1]
            best, best_z = float(-res.fun), r * (np.cos(th) * e + np.sin(th) * v)
    return (best, best_z) if full else best


def _axis_power_integral(p_axis, beta, n, R, plane, side, epsrel=1e-12):
    """int |w - p|^beta over {|w| <= R} intersected with a half-space.

    p = p_axis * e lies on the symmetry axis e; the half-space is
    {w.e > plane} (side=+1) or {w.e <= plane} (side=-1).  In polar
    coordinates about p the radial integral is exact, leaving a 1-D
    integral over the polar angle to the axis.
    """
    gam = beta + 2 * n
    area = sphere_area(2 * n - 2)

    def ray(theta):
        c = math.cos(theta)
        disc = (p_axis * c) ** 2 - p_axis**2 + R**2
        if disc <= 0:
            return 0.0
        sq = math.sqrt(disc)
        t0, t1 = max(-p_axis * c - sq, 0.0), -p_axis * c + sq
        # half-space along the ray: p_axis + t c  >  plane   (side=+1)
        cs = side * c
        bound = side * (plane - p_axis)
        if cs == 0.0:
            if bound >= 0:
                return 0.0
        elif cs > 0:
            t0 = max(t0, bound / cs)
        else:
            t1 = min(t1, bound / cs)
        if t1 <= t0:
            return 0.0
        return (t1**gam - t0**gam) / gam * math.sin(theta) ** (2 * n - 2)

    # the ray structure changes where the plane meets the sphere; split there
    pts = []
    for th in np.linspace(0, np.pi, 9)[1:-1]:
        pts.append(th)
    val, err = integrate.quad(ray, 0.0, math.pi, epsabs=0.0, epsrel=epsrel, limit=400, points=pts)
    return area * val, area * err


def core_difference_integral(beta: float, n: int, R: float) -> tuple[float, float]:
    """J(R) = int_{|w| <= R} | |w|^beta - |w + e|^beta | dw for a unit vector e.

    |w| < |w + e| exactly on {w.e > -1/2}, which fixes the sign on each half.
    """
    total, err = 0.0, 0.0
    for side, sign in ((1, 1.0), (-1, -1.0)):
        v0, e0 = _axis_power_integral(0.0, beta, n, R, -0.5, side)
        v1, e1 = _axis_power_integral(-1.0, beta, n, R, -0.5, side)
        total += sign * (v0 - v1)
        err += e0 + e1
    return total, err


def _angular_rule(n):
    a = (2 * n - 3) / 2.0
    x, w = special.roots_jacobi(ANGULAR_NODES, a, a)
    return x, w * sphere_area(2 * n - 2)


def radial_angular_integral(fun_r_r2, n, r_lo, r_hi, hn, points=None, epsrel=1e-10):
    """int over r_lo < |z| < r_hi of fun(|z|, |z + h|) via adaptive radial quadrature
    times a fixed Gauss-Jacobi angular design."""
    x, w = _angular_rule(n)

    def shell(r):
        r2 = np.sqrt(np.maximum(r * r + 2 * r * hn * x + hn * hn, 0.0))
        return r ** (2 * n - 1) * np.dot(w, fun_r_r2(r, r2))

    if points is not None:
        points = [q for q in points if r_lo < q < r_hi] or None
    out = integrate.quad(
        shell, r_lo, r_hi, epsabs=0.0, epsrel=epsrel, limit=400, points=points, full_output=1
    )
    if len(out) > 3:
        # roundoff notes near the requested tolerance; the error estimate is kept
        log.debug("radial quadrature on [%.3g, %.3g]: %s", r_lo, r_hi, out[3].splitlines()[0])
    return out[0], out[1]


@dataclass
class L1Distance:
    value: float
    inner: float  # |z| <= 2|h|
    middle: float  # 2|h| < |z| <= 1/2
    outer: float  # |z| > 1/2
    error: float  # quadrature error estimate
    inner_majorant: float  # 2 c B^n int_{|z|<=3|h|} |z|^beta
    outer_bound: float  # |h| int |grad density|
    middle_check: float = math.nan  # same piece by radial-angular quadrature

    def __float__(self):
        return self.value


def l1_ma_distance(p: RadialProfile, h, *, check: bool = False) -> L1Distance:
    """int |MA(rho_bar) - MA(rho_bar_h)| split at |z| = 2|h| and |z| = 1/2."""
    _require_valid(p)
    h = _as_translation(h, p.n)
    hn = float(np.linalg.norm(h))
    if hn >= 0.25:
        raise ValueError("l1_ma_distance needs |h| < 1/4")
    if hn == 0:
        return L1Distance(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0 if check else math.nan)
    n, beta = p.n, p.core_exponent
    gam = 2 * n * p.alpha
    cB = p.density_constant * p.B**n

    # core pieces scale exactly: z = |h| w
    scale = cB * hn**gam
    j_in, e_in = core_difference_integral(beta, n, 2.0)
    j_all, e_all = core_difference_integral(beta, n, 0.5 / hn)
    inner = scale * j_in
    middle = scale * (j_all - j_in)
    majorant = 2 * cB * sphere_area(2 * n - 1) * (3 * hn) ** gam / gam

    dens = lambda r: _density_r(r, p)

    def outer_integrand(r, r2):
        return np.abs(dens(r) - np.where(r2 < p.collar[2], dens(np.maximum(r2, 1e-300)), 0.0))

    r_a, r_c, r_b = p.collar
    bps = [r_a - hn, r_a, r_a + hn, r_c, r_b - hn, r_b, r_b + hn]
    outer, e_out = radial_angular_integral(
        outer_integrand, n, 0.5, r_b + hn, hn, points=bps, epsrel=1e-8
    )

    grad = lambda r: abs(float(np.gradient(dens(np.array([r - 1e-6, r, r + 1e-6])), 1e-6)[1]))
    gbound, _ = integrate.quad(
        lambda r: grad(r) * r ** (2 * n - 1), 0.5 - hn, r_b, points=[r_a, r_c], limit=400
    )
    outer_bound = hn * sphere_area(2 * n - 1) * gbound

    middle_check = math.nan
    if check:

        def core_integrand(r, r2):
            return cB * np.abs(r**beta - r2**beta)

        middle_check, _ = radial_angular_integral(core_integrand, n, 2 * hn, 0.5, hn)

    err = scale * (e_in + e_all) + e_out
    return L1Distance(
        inner + middle + outer, inner, middle, outer, err, majorant, outer_bound, middle_check
    )


# --- sharpness ----------------------------------------------------------------


def h_schedule(n: int, count: int = 5, seed: int | None = None, start: float = -3.0) -> list[np.ndarray]:
    """|h| = 10^{start + j/4}, j = 0..count-1, along a fixed or random direction."""
    if seed is None:
        e = np.zeros(n, complex)
        e[0] = 1.0
    else:
        rng = np.random.default_rng(seed)
        e = rng.normal(size=n) + 1j * rng.normal(size=n)
        e /= np.linalg.norm(e)
    return [10.0 ** (start + j / 4) * e for j in range(count)]


@dataclass
class SharpnessReport:
    profile: RadialProfile
    norms: list
    sup: list
    l1: list
    fit_sup: ExponentFit
    fit_l1: ExponentFit
    fit_core: ExponentFit | None
    ratio: float
    implied_m: float
    conclusive: bool
    max_residual: float = 0.05
    rows: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "slope_sup": self.fit_sup.slope,
            "slope_l1": self.fit_l1.slope,
            "expected_slope_sup": 2 * self.profile.alpha,
            "expected_slope_l1": 2 * self.profile.n * self.profile.alpha,
            "ratio": self.ratio,
            "implied_m_lower_bound": self.implied_m,
            "n": self.profile.n,
            "conclusive": self.conclusive,
            "fit_sup": self.fit_sup.as_dict(),
            "fit_l1": self.fit_l1.as_dict(),
            "fit_l1_core": self.fit_core.as_dict() if self.fit_core else None,
        }


def sharpness_from_distances(profile, norms, sup, l1, core=None, max_residual=0.05) -> SharpnessReport:
    """Fit both distances; the implied bound is m >= slope_l1 / slope_sup."""
    fs = fit_power_law(norms, sup, min_samples=4, min_decades=1.0)
    fl = fit_power_law(norms, l1, min_samples=4, min_decades=1.0)
    fc = fit_power_law(norms, core, min_samples=4) if core is not None else None
    ratio = fl.slope / fs.slope
    conclusive = max(fs.residual, fl.residual) <= max_residual
    return SharpnessReport(
        profile, list(norms), list(sup), list(l1), fs, fl, fc, ratio, ratio, conclusive, max_residual
    )


def sharpness_report(p: RadialProfile, h_samples=None, max_residual: float = 0.05) -> SharpnessReport:
    """Fit sup and L^1 distances against |h|; the slope ratio bounds the exponent m >= n."""
    _require_valid(p)
    if h_samples is None:
        h_samples = h_schedule(p.n)
    if len(h_samples) < 4:
        raise ValueError("need at least 4 translation samples")
    rows, norms, sups, l1s, cores = [], [], [], [], []
    for h in h_samples:
        hn = float(np.linalg.norm(h))
        s = sup_distance(p, h)
        d = l1_ma_distance(p, h)
        norms.append(hn)
        sups.append(s)
        l1s.append(d.value)
        cores.append(d.inner + d.middle)
        rows.append(
            {
                "h_norm": hn,
                "sup_distance": s,
                "origin_witness": p.B * hn ** (2 * p.alpha),
                "l1_distance": d.value,
                "l1_inner": d.inner,
                "l1_middle": d.middle,
                "l1_outer": d.outer,
                "l1_error": d.error,
            }
        )
    rep = sharpness_from_distances(p, norms, sups, l1s, cores, max_residual)
    rep.rows = rows
    return rep
