"""Discrete checks of the comparison principle, the mixed-measure
inequality, the sublevel capacity inequality, capacity domination and the
a priori bound."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .capacity import ball, capacity
from .fitting import ExponentFit, FitError, fit_power_law
from .grid import (
    Grid,
    GridError,
    HermitianField,
    MeasureField,
    PotentialField,
    complex_hessian,
    ma_measure,
    uniform_measure,
)

log = logging.getLogger(__name__)


def _field(u, grid=None) -> PotentialField:
    if isinstance(u, PotentialField):
        return u
    if grid is None:
        raise GridError("raw arrays need a grid")
    return PotentialField(u, grid)


# --- comparison principle ------------------------------------------------------


@dataclass
class ComparisonReport:
    violation: float
    mass_psi: float  # int_{phi<psi} det(G + H psi)
    mass_phi: float  # int_{phi<psi} det(G + H phi)
    set_volume: float


def comparison_check(phi: PotentialField, psi: PotentialField, G: HermitianField) -> ComparisonReport:
    """max(0, int_{phi<psi} MA(psi) - int_{phi<psi} MA(phi)) on the strict node set."""
    grid = phi.grid
    S = phi.values < psi.values
    m_psi = grid.integrate(ma_measure(psi, G).values, S)
    m_phi = grid.integrate(ma_measure(phi, G).values, S)
    return ComparisonReport(max(0.0, m_psi - m_phi), m_psi, m_phi, grid.integrate(S.astype(float)))


# --- mixed Monge-Ampere ----------------------------------------------------------


def _det2(M):
    return (M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]).real


def mixed_determinant(A, B) -> np.ndarray:
    """D(A, B) = (det(A + B) - det A - det B) / 2 for stacks of 2x2 matrices."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != (2, 2) or B.shape[-2:] != (2, 2):
        raise GridError("mixed determinant is implemented for n = 2 only")
    return 0.5 * (_det2(A + B) - _det2(A) - _det2(B))


def random_psd_pairs(rng: np.random.Generator, count: int, rank_deficient: float = 0.1):
    """Random PSD Hermitian 2x2 pairs X X^* with log-uniform scales.

    A fraction ``rank_deficient`` of each stack is rank one.
    """
    def draw():
        X = rng.standard_normal((count, 2, 2)) + 1j * rng.standard_normal((count, 2, 2))
        low = rng.random(count) < rank_deficient
        X[low, :, 1] = 0.0
        M = X @ np.conj(np.swapaxes(X, -1, -2))
        M = M * (10.0 ** rng.uniform(-3, 3, size=count))[:, None, None]
        # exact Hermitian symmetry
        return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))

    return draw(), draw()


@dataclass
class MixedReport:
    violation: float  # max(0, sqrt(f g) w - D(A, B))
    min_slack: float  # min of D(A, B) - sqrt(det A det B)
    pre_violation: float  # how far MA(psi) >= f w, MA(phi) >= g w fail


def mixed_ma_check(
    phi: PotentialField,
    psi: PotentialField,
    f,
    g,
    Omega: MeasureField,
    G: HermitianField,
) -> MixedReport:
    """Pointwise D(G + H psi, G + H phi) >= sqrt(f g) Omega with both matrices PSD-clamped."""
    grid = phi.grid
    if grid.n != 2:
        raise GridError("mixed_ma_check needs n = 2")
    A = (G + complex_hessian(psi, grid)).clamped().matrix()
    B = (G + complex_hessian(phi, grid)).clamped().matrix()
    D = mixed_determinant(A, B)
    dA, dB = np.maximum(_det2(A), 0.0), np.maximum(_det2(B), 0.0)
    w = Omega.weights
    target = np.sqrt(np.asarray(f) * np.asarray(g)) * w
    pre = max(0.0, float(np.max(np.asarray(f) * w - dA)), float(np.max(np.asarray(g) * w - dB)))
    return MixedReport(
        max(0.0, float(np.max(target - D))),
        float(np.min(D - np.sqrt(dA * dB))),
        pre,
    )


# --- sublevel capacity inequality -----------------------------------------------


@dataclass
class SublevelReport:
    lhs: float  # cap({psi + 2s < phi})
    rhs: float  # ((C+1)/s)^n int_{psi + s < phi} MA(psi)
    violation: float
    C: float
    s: float
    prefactor: float
    mass: float


def sublevel_prefactor(C: float, s: float, n: int = 2) -> float:
    return ((C + 1.0) / s) ** n


def sublevel_capacity_check(
    phi: PotentialField,
    psi: PotentialField,
    s: float,
    G: HermitianField,
    grid: Grid | None = None,
    **cap_kw,
) -> SublevelReport:
    """Compare cap({psi + 2s < phi}) with ((C+1)/s)^n int_{psi+s<phi} MA(psi).

    phi must already be shifted into [0, C], C = max phi.
    """
    grid = phi.grid if grid is None else grid
    if phi.values.min() < 0:
        raise GridError("phi must be shifted so that min phi >= 0")
    C = float(phi.values.max())
    if not 0 < s < C + 1:
        raise GridError(f"s = {s} outside (0, C + 1) with C = {C}")
    lhs = capacity(psi.values + 2 * s < phi.values, G, grid, **cap_kw)
    mass = grid.integrate(ma_measure(psi, G).values, psi.values + s < phi.values)
    pref = sublevel_prefactor(C, s, grid.n)
    rhs = pref * mass
    return SublevelReport(lhs, rhs, max(0.0, lhs - rhs), C, s, pref, mass)


# --- domination by capacity -------------------------------------------------------


def default_balls(grid: Grid, center=(0.0, 0.0, 0.0, 0.0)) -> list[np.ndarray]:
    """Metric balls of shrinking radius down to a single node."""
    radii = grid.h * np.array([3.0, 2.5, 2.0, 1.5, 1.0, 0.0])
    return [ball(grid, r, center) for r in radii]


@dataclass
class DominationFit:
    alpha: float
    chi: float
    fit_omega: ExponentFit
    fit_f: ExponentFit
    capacities: list = field(default_factory=list)
    omega_masses: list = field(default_factory=list)
    f_masses: list = field(default_factory=list)


def domination_check(
    Omega: MeasureField,
    G: HermitianField,
    grid: Grid,
    K_family=None,
    f=None,
    min_decades: float = 1.0,
) -> DominationFit:
    """Fit Omega(K) ~ cap(K)^(1+alpha) and int_K f Omega ~ cap(K)^(1+chi)."""
    K_family = default_balls(grid) if K_family is None else K_family
    f = np.ones(grid.shape) if f is None else np.asarray(f, dtype=float)
    caps, om, fm = [], [], []
    for K in K_family:
        caps.append(capacity(K, G, grid))
        om.append(grid.integrate(Omega.weights, K))
        fm.append(grid.integrate(f * Omega.weights, K))
    caps = np.array(caps)
    keep = caps > 0
    if keep.sum() < 3:
        raise FitError("degenerate fit: fewer than three sets with positive capacity")
    span = np.log10(caps[keep].max() / caps[keep].min())
    if span < min_decades:
        raise FitError(f"degenerate fit: capacities span {span:.2f} decades < {min_decades}")
    fo = fit_power_law(caps[keep], np.array(om)[keep], min_samples=3)
    ff = fit_power_law(caps[keep], np.array(fm)[keep], min_samples=3)
    return DominationFit(fo.slope - 1.0, ff.slope - 1.0, fo, ff, list(caps), om, fm)


# --- a priori bound -------------------------------------------------------------


def lp_norm(f, Omega: MeasureField, grid: Grid, p: float) -> float:
    return grid.integrate(np.abs(f) ** p * Omega.weights) ** (1.0 / p)


def peaked_density(grid: Grid, gamma: float, center=(0.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """1 + max(d, h/2)^(-gamma), before mass normalization."""
    d = np.maximum(grid.torus_distance(center), grid.h / 2)
    return 1.0 + d ** (-gamma)


@dataclass
class AprioriReport:
    gammas: list
    lp_norms: list
    sup_norms: list
    fit: ExponentFit | None
    bound: float
    converged: list

    @property
    def ok(self) -> bool:
        return self.fit is not None and self.fit.slope <= self.bound


def apriori_diagnostic(
    grid: Grid,
    G: HermitianField,
    gammas=(0.5, 1.0, 1.5, 2.0, 2.5),
    p: float = 2.0,
    Omega: MeasureField | None = None,
    **solve_kw,
) -> AprioriReport:
    """log ||u||_inf against log ||f||_p over a family of peaked densities.

    The bound ||u||_inf <= C ||f||_p^n caps the growth rate at n; the
    report compares the fitted slope with n + 0.5.
    """
    Omega = uniform_measure(grid) if Omega is None else Omega
    norms, sups, conv = [], [], []
    for gam in gammas:
        f = solver.normalize_density(peaked_density(grid, gam), Omega, G, grid)
        res = solver.solve(f, G, Omega, grid, **solve_kw)
        norms.append(lp_norm(f, Omega, grid, p))
        sups.append(res.sup_norm)
        conv.append(res.converged)
    x = np.array(norms)[np.array(conv)]
    y = np.array(sups)[np.array(conv)]
    try:
        fit = fit_power_law(x, y, min_samples=3)
    except FitError as exc:
        log.warning("a priori fit skipped: %s", exc)
        fit = None
    return AprioriReport(list(gammas), norms, sups, fit, grid.n + 0.5, conv)
