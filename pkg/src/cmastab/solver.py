"""Gauss-Seidel solver for det(G + H u) = c f Omega on the periodic grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .grid import Grid, GridError, HermitianField, MeasureField, PotentialField

log = logging.getLogger(__name__)

TOL = 1e-8
TOL_PSD = 1e-10
MAX_SWEEPS = 50_000


@dataclass
class SolveResult:
    u: PotentialField
    residual: float
    sweeps: int
    solvability: float  # c in det(G + H u) = c f Omega
    converged: bool
    psh_violation: float
    history: list = field(default_factory=list)

    @property
    def sup_norm(self) -> float:
        return self.u.sup_norm

    def diagnostics(self) -> dict:
        return {
            "residual": self.residual,
            "sweeps": self.sweeps,
            "solvability": self.solvability,
            "converged": self.converged,
            "sup_norm": self.sup_norm,
            "psh_violation": self.psh_violation,
        }


def _canonical_sum(a, origin):
    # sum in an order fixed relative to the sweep origin
    return float(np.roll(a, [-o for o in origin], axis=(0, 1, 2, 3)).sum())


def mass_mismatch(f, Omega: MeasureField, G: HermitianField, grid: Grid) -> float:
    target = grid.integrate(G.det())
    return abs(grid.integrate(f * Omega.weights) - target) / target


def normalize_density(f, Omega: MeasureField, G: HermitianField, grid: Grid) -> np.ndarray:
    """Rescale f so that int f Omega = int det G."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise GridError("density must be nonnegative")
    return f * (grid.integrate(G.det()) / grid.integrate(f * Omega.weights))


def solve(
    f,
    G: HermitianField,
    Omega: MeasureField,
    grid: Grid,
    tol: float = TOL,
    max_sweeps: int = MAX_SWEEPS,
    *,
    omega: float = 1.0,
    origin=(0, 0, 0, 0),
    u0=None,
) -> SolveResult:
    """Nonlinear Gauss-Seidel for det(G + H u) = c f Omega, sup-normalized output.

    At each node the centre value enters the Hessian as -u(x)/h^2 on the
    diagonal, so the update solving det(M - s I) = c r with s <= lambda_min(M)
    is s = (l1 + l2)/2 - sqrt(((l1 - l2)/2)^2 + r).  The discrete
    solvability constant c is re-estimated after every sweep as the mass
    ratio sum det(G + H u) / sum f Omega, which vanishes the mean drift.
    ``omega`` > 1 over-relaxes the update (1 is plain Gauss-Seidel).
    """
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise GridError("density shape does not match the grid")
    if np.any(f < 0):
        raise GridError("density must be nonnegative")
    mism = mass_mismatch(f, Omega, G, grid)
    if mism > 1e-10:
        raise GridError(f"density not mass-normalized (relative mismatch {mism:.3g})")

    r = np.ascontiguousarray(f * Omega.weights)
    g = K.split(G)
    u = np.zeros(grid.shape) if u0 is None else np.array(u0, dtype=float, copy=True)
    origin = tuple(int(o) % grid.N for o in origin)
    det = np.empty(grid.shape)
    lmin = np.empty(grid.shape)
    r_sum = _canonical_sum(r, origin)
    c = 1.0
    residual = np.inf
    history = []
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        K.ma_sweep(u, *g, r, c, grid.h, omega, *origin)
        K.ma_fields(u, *g, grid.h, det, lmin)
        c = _canonical_sum(det, origin) / r_sum
        residual = float(np.abs(det - c * r).max())
        if sweeps % 50 == 0 or sweeps == 1:
            history.append((sweeps, residual))
        if residual < tol:
            break
    u -= np.roll(u, [-o for o in origin], axis=(0, 1, 2, 3)).max()
    converged = residual < tol
    if not converged:
        log.warning("solver stopped after %d sweeps with residual %.3g", sweeps, residual)
    K.ma_fields(u, *g, grid.h, det, lmin)
    return SolveResult(
        PotentialField(u, grid, "sup-normalized"),
        residual,
        sweeps,
        c,
        converged,
        float(max(0.0, -lmin.min())),
        history,
    )


def psh_project(u, G: HermitianField, tol_psd: float = TOL_PSD, max_sweeps: int = MAX_SWEEPS) -> PotentialField:
    """Lower u until lambda_min(G + H u) >= -tol_psd everywhere.

    Sweeps u(x) <- min(u(x), h^2 lambda_min(M(x))); the output never exceeds
    the input.
    """
    grid = u.grid
    v = np.array(u.values, dtype=float, copy=True)
    g = K.split(G)
    det = np.empty(grid.shape)
    lmin = np.empty(grid.shape)
    K.ma_fields(v, *g, grid.h, det, lmin)
    sweeps = 0
    while lmin.min() < -tol_psd and sweeps < max_sweeps:
        K.obstacle_sweep(v, *g, v.copy(), grid.h, 0, 0, 0, 0)
        K.ma_fields(v, *g, grid.h, det, lmin)
        sweeps += 1
    if lmin.min() < -tol_psd:
        log.warning("psh projection stopped at lambda_min %.3g", lmin.min())
    return PotentialField(v, grid, u.tag)


def min_eigenvalue(u: PotentialField, G: HermitianField) -> np.ndarray:
    det = np.empty(u.grid.shape)
    lmin = np.empty(u.grid.shape)
    K.ma_fields(np.ascontiguousarray(u.values), *K.split(G), u.grid.h, det, lmin)
    return lmin
