"""Stability experiments: density pairs, solves, pair normalization, fits."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import solver
from .checks import comparison_check, mixed_ma_check, sublevel_capacity_check
from .exponents import egz_exponent, reference_exponents
from .fitting import ExponentFit, FitError, fit_power_law
from .grid import (
    DensityPair,
    Grid,
    GridError,
    HermitianField,
    MeasureField,
    PotentialField,
    random_trig_field,
)

log = logging.getLogger(__name__)

FAMILIES = ("trig", "peak", "indicator")


class InsufficientRecords(FitError):
    pass


@dataclass
class PerturbationFamily:
    """Zero-mean perturbations eta with ||eta||_{L1(Omega)} = 1 and a theta schedule."""

    kind: str = "trig"
    thetas: tuple = tuple(np.logspace(-3.0, -1.0, 6))
    seed: int = 0
    gamma: float = 1.0  # peak exponent
    radius: float = 0.2  # indicator radius
    modes: int = 3

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise GridError(f"unknown family {self.kind!r}; choose from {FAMILIES}")
        self.thetas = tuple(float(t) for t in self.thetas)
        if any(t < 0 for t in self.thetas):
            raise GridError("theta schedule must be nonnegative")

    @property
    def decades(self) -> float:
        pos = [t for t in self.thetas if t > 0]
        return float(np.log10(max(pos) / min(pos))) if len(pos) > 1 else 0.0

    def shape(self, grid: Grid) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        center = tuple(rng.integers(0, grid.N, size=4) * grid.h)
        if self.kind == "trig":
            v = random_trig_field(rng, 1.0, n_modes=self.modes).values(grid)
        elif self.kind == "peak":
            d = np.maximum(grid.torus_distance(center), grid.h / 2)
            v = d ** (-self.gamma)
        else:
            v = (grid.torus_distance(center) <= self.radius).astype(float)
            # periodic mollification: a few passes of the 9-point axis average
            for _ in range(2):
                v = (v + sum(np.roll(v, s, a) for a in range(4) for s in (1, -1))) / 9.0
        return v

    def eta(self, grid: Grid, Omega: MeasureField) -> np.ndarray:
        v = self.shape(grid)
        w = Omega.weights
        v = v - grid.integrate(v * w) / grid.integrate(w)
        return v / grid.integrate(np.abs(v) * w)


@dataclass
class StabilityRecord:
    index: int
    theta_target: float
    theta: float  # ||f - g||_{L1(Omega)}
    d_sup: float
    d_s: float
    residual_f: float
    residual_g: float
    converged: bool
    grid_id: str
    clip_bias: float
    shift: float
    solvability: float

    def as_row(self) -> dict:
        return asdict(self)


# --- pairs ----------------------------------------------------------------------


def normalize_pair(phi: PotentialField, psi: PotentialField):
    """Shift psi so that max(phi - psi) = max(psi - phi)."""
    d = phi.values - psi.values
    c = 0.5 * (d.max() - (-d).max())
    return phi, PotentialField(psi.values + c, psi.grid, "pair-normalized"), float(c)


def l1_norm(v, Omega: MeasureField, grid: Grid) -> float:
    return grid.integrate(np.abs(v) * Omega.weights)


def ls_norm(v, Omega: MeasureField, grid: Grid, s: float) -> float:
    if np.isinf(s):
        return float(np.abs(v).max())
    return grid.integrate(np.abs(v) ** s * Omega.weights) ** (1.0 / s)


def base_density(G: HermitianField, Omega: MeasureField, grid: Grid) -> np.ndarray:
    """f with f Omega = det G pointwise (the flat case gives f = 1)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(Omega.weights > 0, G.det() / Omega.weights, 0.0)
    return solver.normalize_density(np.maximum(f, 0.0), Omega, G, grid)


def make_pair(f, eta, theta: float, Omega: MeasureField, G: HermitianField, grid: Grid, p: float = 2.0):
    """g = clip(f + theta eta, 0) renormalized; the clipped L1 mass is reported."""
    raw = f + theta * eta
    clipped = np.maximum(raw, 0.0)
    bias = l1_norm(clipped - raw, Omega, grid)
    g = solver.normalize_density(clipped, Omega, G, grid)
    f = solver.normalize_density(f, Omega, G, grid)
    return DensityPair(f, g, p, 1.0, 1.0, bias)


# --- sweeps -----------------------------------------------------------------------


@dataclass
class SweepResult:
    records: list
    fit: ExponentFit | None
    exponent: float | None
    reference: dict
    comparison: dict
    family: dict
    eps: float
    diagnostics: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "family": self.family,
            "eps": self.eps,
            "fit": None if self.fit is None else self.fit.as_dict(),
            "exponent": self.exponent,
            "reference": self.reference,
            "comparison": self.comparison,
            "n_records": len(self.records),
            "n_converged": sum(r.converged for r in self.records),
        }


def _solve_pairs(family, G, Omega, grid, s, solve_kw):
    eta = family.eta(grid, Omega)
    f = base_density(G, Omega, grid)
    base = solver.solve(f, G, Omega, grid, **solve_kw)
    phi = base.u
    records, fields = [], []
    gid = f"N{grid.N}-{G.family}"
    for j, th in enumerate(family.thetas):
        pair = make_pair(f, eta, th, Omega, G, grid)
        res = solver.solve(pair.g, G, Omega, grid, u0=phi.values, **solve_kw)
        _, psi, c = normalize_pair(phi, res.u)
        diff = phi.values - psi.values
        records.append(
            StabilityRecord(
                j,
                th,
                l1_norm(pair.f - pair.g, Omega, grid),
                float(np.abs(diff).max()),
                ls_norm(diff, Omega, grid, s),
                base.residual,
                res.residual,
                bool(base.converged and res.converged),
                gid,
                pair.clip_bias,
                c,
                res.solvability,
            )
        )
        fields.append((pair, psi))
    return phi, records, fields


def _fit_records(records, x_key, y_key, min_decades):
    conv = [r for r in records if r.converged]
    if conv and all(getattr(r, y_key) == 0 for r in conv):
        return None  # f = g: nothing to fit
    good = [r for r in conv if getattr(r, x_key) > 0 and getattr(r, y_key) > 0]
    if len(good) < 4:
        raise InsufficientRecords(f"only {len(good)} converged records with nonzero distances")
    x = [getattr(r, x_key) for r in good]
    y = [getattr(r, y_key) for r in good]
    return fit_power_law(x, y, min_samples=4, min_decades=min_decades)


def run_stability_sweep(
    family: PerturbationFamily,
    G: HermitianField,
    Omega: MeasureField,
    grid: Grid,
    eps: float = 0.1,
    *,
    s: float = 2.0,
    min_decades: float = 1.5,
    diagnostics: bool = True,
    **solve_kw,
) -> SweepResult:
    """Fit log ||phi - psi||_inf against log ||f - g||_1 over the theta schedule.

    Unconverged solves are kept in the records but never enter the fit.  All
    d_sup = 0 (f = g) skips the fit.
    """
    if family.decades < min_decades and any(t > 0 for t in family.thetas):
        raise GridError(f"theta schedule spans {family.decades:.2f} decades < {min_decades}")
    phi, records, fields = _solve_pairs(family, G, Omega, grid, s, solve_kw)
    fit = _fit_records(records, "theta", "d_sup", min_decades)
    n = grid.n
    ref = reference_exponents(n, eps)
    floor = 1.0 / (n + 1)
    exp_hat = None if fit is None else fit.slope
    cmp = {"floor": floor}
    if exp_hat is not None:
        cmp.update(
            above_floor=exp_hat >= floor,
            above_step1=exp_hat >= ref["step1"],
            above_improved=exp_hat >= ref["improved"],
            above_optimal=exp_hat >= ref["optimal"],
        )
    diag = []
    if diagnostics:
        for rec, (pair, psi) in zip(records, fields):
            t = min(0.5, max(rec.theta, 1e-12) ** (1.0 / (n + eps)) if rec.theta > 0 else 0.5)
            d = proof_set_diagnostics(phi, psi, pair.f, pair.g, t, 1.0, Omega, grid)
            d["index"] = rec.index
            diag.append(d)
    fam = {"kind": family.kind, "seed": family.seed, "thetas": list(family.thetas)}
    return SweepResult(records, fit, exp_hat, ref, cmp, fam, eps, diag)


def run_egz_sweep(
    family: PerturbationFamily,
    G: HermitianField,
    Omega: MeasureField,
    grid: Grid,
    s: float = 2.0,
    p: float = 2.0,
    eps: float = 0.1,
    *,
    min_decades: float = 1.5,
    **solve_kw,
) -> SweepResult:
    """Fit log ||phi - psi||_inf against log ||phi - psi||_{L^s}."""
    if family.decades < min_decades and any(t > 0 for t in family.thetas):
        raise GridError(f"theta schedule spans {family.decades:.2f} decades < {min_decades}")
    _, records, _ = _solve_pairs(family, G, Omega, grid, s, solve_kw)
    fit = _fit_records(records, "d_s", "d_sup", 0.0)
    ref = {"egz": egz_exponent(grid.n, s, p, eps), "s": s, "p": p, "q": p / (p - 1.0)}
    exp_hat = None if fit is None else fit.slope
    cmp = {} if exp_hat is None else {"above_egz": exp_hat >= ref["egz"]}
    fam = {"kind": family.kind, "seed": family.seed, "thetas": list(family.thetas)}
    return SweepResult(records, fit, exp_hat, ref, cmp, fam, eps)


def proof_set_diagnostics(phi, psi, f, g, t: float, a: float, Omega: MeasureField, grid: Grid) -> dict:
    """Masses of E_k = {psi < phi - k a t} (k = 0, 2, 4) and of G = {f < (1 - t^2) g}."""
    gw = np.asarray(g) * Omega.weights
    out = {"t": t, "a": a}
    for k in (0, 2, 4):
        out[f"mass_E{k}"] = grid.integrate(gw, psi.values < phi.values - k * a * t)
    Gset = np.asarray(f) < (1.0 - t * t) * np.asarray(g)
    out["mass_G"] = grid.integrate(gw, Gset)
    out["l1_fg"] = l1_norm(np.asarray(f) - np.asarray(g), Omega, grid)
    out["G_bound_holds"] = bool(t * t * out["mass_G"] <= out["l1_fg"] * (1 + 1e-12))
    return out


# --- property checks on solved pairs ----------------------------------------------


def random_density(rng, grid: Grid, Omega, G, amplitude: float = 0.8) -> np.ndarray:
    v = random_trig_field(rng, 1.0, n_modes=3).values(grid)
    v = v / np.abs(v).max()
    return solver.normalize_density(1.0 + amplitude * v, Omega, G, grid)


@dataclass
class PropertyRecord:
    index: int
    comparison_violation: float
    comparison_mass_psi: float
    comparison_mass_phi: float
    sublevel_lhs: float
    sublevel_rhs: float
    sublevel_violation: float
    sublevel_s: float
    sublevel_C: float
    mixed_violation: float
    mixed_slack: float
    converged: bool

    def as_row(self) -> dict:
        return asdict(self)


def property_checks(
    grid: Grid,
    G: HermitianField,
    Omega: MeasureField,
    n_pairs: int = 10,
    seed: int = 0,
    **solve_kw,
) -> list[PropertyRecord]:
    """Comparison, sublevel-capacity and mixed checks on solved random pairs.

    Densities come from a seeded trig family evaluated on the grid, so the
    same seed gives the same continuum pairs at every N.  For the sublevel
    check phi is shifted into [0, C], s = C/4, and psi is shifted by a
    constant so that max(phi - psi) = 3s; then {psi + 2s < phi} is a
    nonempty proper node set.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_pairs):
        f = random_density(rng, grid, Omega, G)
        g = random_density(rng, grid, Omega, G)
        a = solver.solve(f, G, Omega, grid, **solve_kw)
        b = solver.solve(g, G, Omega, grid, **solve_kw)
        phi = solver.psh_project(a.u, G)
        psi = solver.psh_project(b.u, G)
        cr = comparison_check(phi, psi, G)
        ph = PotentialField(phi.values - phi.values.min(), grid)
        C = float(ph.values.max())
        s = C / 4
        ps = PotentialField(psi.values + (ph.values - psi.values).max() - 3 * s, grid)
        sr = sublevel_capacity_check(ph, ps, s, G, grid)
        # psi solves for g, phi for f: det(G + H psi) = c g w, det(G + H phi) = c f w
        mr = mixed_ma_check(phi, psi, b.solvability * g, a.solvability * f, Omega, G)
        out.append(
            PropertyRecord(
                i,
                cr.violation,
                cr.mass_psi,
                cr.mass_phi,
                sr.lhs,
                sr.rhs,
                sr.violation,
                s,
                C,
                mr.violation,
                mr.min_slack,
                bool(a.converged and b.converged),
            )
        )
    return out
