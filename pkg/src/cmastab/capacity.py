"""Relative capacity on the grid via the relative extremal envelope."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .grid import Grid, HermitianField, PotentialField

log = logging.getLogger(__name__)


@dataclass
class Envelope:
    u: PotentialField
    sweeps: int
    change: float
    converged: bool


def relative_extremal(K_mask, G: HermitianField, grid: Grid, tol: float = 1e-10, max_sweeps: int = 50_000) -> Envelope:
    """Largest discrete omega-psh u with u <= 0 and u <= -1 on K.

    Gauss-Seidel from u = 0: u(x) <- min(obstacle(x), h^2 lambda_min(M(x))).
    """
    K_mask = np.asarray(K_mask, dtype=bool)
    obstacle = np.where(K_mask, -1.0, 0.0)
    u = np.zeros(grid.shape)
    g = K.split(G)
    change = np.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        change = K.obstacle_sweep(u, *g, obstacle, grid.h, 0, 0, 0, 0)
        if change < tol:
            break
    converged = change < tol
    if not converged:
        log.warning("envelope iteration stopped with change %.3g", change)
    return Envelope(PotentialField(u, grid, "extremal"), sweeps, float(change), converged)


def capacity(K_mask, G: HermitianField, grid: Grid, tol: float = 1e-10, *, method: str = "complement", full: bool = False):
    """cap(K) = int_K det(G + H u_K) with u_K the relative extremal envelope.

    The default evaluates the mass on K through its complement,
    int det G - int_{X minus K} det(G + H u_K), using that the total mass is
    cohomological.  The direct sum over K ("direct") picks up spurious mass
    from the wide mixed stencil across the kink of u_K at the boundary of K;
    that excess grows as the grid is refined, so it is kept only as a
    diagnostic.  Off K the envelope is either maximal (det = 0) or resting on
    the obstacle 0, where no kink of that kind forms.
    """
    if method not in ("complement", "direct"):
        raise ValueError(f"unknown capacity method {method!r}")
    K_mask = np.asarray(K_mask, dtype=bool)
    if not K_mask.any():
        return (0.0, None) if full else 0.0
    env = relative_extremal(K_mask, G, grid, tol)
    det = np.empty(grid.shape)
    lmin = np.empty(grid.shape)
    K.ma_fields(env.u.values, *K.split(G), grid.h, det, lmin)
    if method == "direct":
        val = grid.integrate(det, K_mask)
    else:
        val = max(0.0, grid.integrate(G.det()) - grid.integrate(det, ~K_mask))
    return (val, env) if full else val


def ball(grid: Grid, radius: float, center=(0.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """Node set of a closed metric ball on the torus."""
    return grid.torus_distance(center) <= radius + 1e-12
