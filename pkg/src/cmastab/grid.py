"""Periodic grid on the unit torus of C^2 and the discrete complex Hessian.

Real coordinates are ordered (x1, y1, x2, y2); arrays have shape (N, N, N, N)
with node (i, j, k, l) at (i, j, k, l) / N.  The complex Hessian uses
d_j dbar_k = (dxj dxk + dyj dyk + i (dxj dyk - dyj dxk)) / 4 with
second-order central differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

X1, Y1, X2, Y2 = 0, 1, 2, 3


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    N: int = 16
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise GridError("only complex dimension n = 2 grids are supported")
        if self.N < 8 or self.N % 2:
            raise GridError(f"N must be even and >= 8, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** (2 * self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * (2 * self.n)

    def coords(self) -> list[np.ndarray]:
        x = np.arange(self.N) * self.h
        return np.meshgrid(x, x, x, x, indexing="ij")

    def integrate(self, values, mask=None) -> float:
        values = np.asarray(values, dtype=float)
        if mask is not None:
            values = np.where(mask, values, 0.0)
        return float(values.sum() * self.cell_volume)

    def torus_distance(self, center) -> np.ndarray:
        """Euclidean distance on the periodic unit torus to ``center``."""
        d2 = 0.0
        for x, c in zip(self.coords(), center):
            d = np.abs(x - c)
            d = np.minimum(d, 1.0 - d)
            d2 = d2 + d * d
        return np.sqrt(d2)


@dataclass
class PotentialField:
    values: np.ndarray
    grid: Grid
    tag: str = "raw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"field shape {self.values.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("potential has non-finite values")

    def sup_normalized(self) -> "PotentialField":
        return PotentialField(self.values - self.values.max(), self.grid, "sup-normalized")

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


@dataclass
class HermitianField:
    """Per-node 2x2 Hermitian matrices [[a11, a12], [conj(a12), a22]]."""

    a11: np.ndarray
    a22: np.ndarray
    a12: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a11 = np.asarray(self.a11, dtype=float)
        self.a22 = np.asarray(self.a22, dtype=float)
        self.a12 = np.asarray(self.a12, dtype=complex)

    def __add__(self, other: "HermitianField") -> "HermitianField":
        return HermitianField(
            self.a11 + other.a11, self.a22 + other.a22, self.a12 + other.a12, self.family, self.params
        )

    def matrix(self) -> np.ndarray:
        out = np.empty(self.a11.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = self.a11
        out[..., 1, 1] = self.a22
        out[..., 0, 1] = self.a12
        out[..., 1, 0] = np.conj(self.a12)
        return out

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """(lambda_min, lambda_max) per node."""
        m = 0.5 * (self.a11 + self.a22)
        rad = np.sqrt(0.25 * (self.a11 - self.a22) ** 2 + np.abs(self.a12) ** 2)
        return m - rad, m + rad

    def det(self) -> np.ndarray:
        return self.a11 * self.a22 - np.abs(self.a12) ** 2

    def clamped_det(self) -> np.ndarray:
        lo, hi = self.eigenvalues()
        return np.maximum(lo, 0.0) * np.maximum(hi, 0.0)

    def clamped(self) -> "HermitianField":
        """Project each matrix onto the PSD cone (negative eigenvalues set to 0)."""
        lo, hi = self.eigenvalues()
        gap = hi - lo
        # rank-one part along the top eigenvector: hi (M - lo I) / (hi - lo)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(gap > 0, np.maximum(hi, 0.0) / gap, 0.0)
        top_only = lo < 0
        a11 = np.where(top_only, w * (self.a11 - lo), self.a11)
        a22 = np.where(top_only, w * (self.a22 - lo), self.a22)
        a12 = np.where(top_only, w * self.a12, self.a12)
        return HermitianField(a11, a22, a12, self.family, self.params)

    def total_mass(self, grid: Grid) -> float:
        return grid.integrate(self.det())


@dataclass
class MeasureField:
    """Nonnegative per-node density of a measure against cell volume."""

    weights: np.ndarray
    alpha: float | None = None
    chi: float | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise GridError("measure weights must be finite and nonnegative")


@dataclass
class DensityPair:
    f: np.ndarray
    g: np.ndarray
    p: float = 2.0
    scale_f: float = 1.0
    scale_g: float = 1.0
    clip_bias: float = 0.0


# --- discrete operators -----------------------------------------------------


def _d2(u, a, h):
    return (np.roll(u, -1, a) - 2.0 * u + np.roll(u, 1, a)) / (h * h)


def _dmix(u, a, b, h):
    up = np.roll(u, -1, a)
    um = np.roll(u, 1, a)
    return (np.roll(up, -1, b) - np.roll(up, 1, b) - np.roll(um, -1, b) + np.roll(um, 1, b)) / (
        4.0 * h * h
    )


def complex_hessian(u, grid: Grid) -> HermitianField:
    """Central-difference complex Hessian of a periodic field."""
    v = u.values if isinstance(u, PotentialField) else np.asarray(u, dtype=float)
    h = grid.h
    a11 = 0.25 * (_d2(v, X1, h) + _d2(v, Y1, h))
    a22 = 0.25 * (_d2(v, X2, h) + _d2(v, Y2, h))
    re = _dmix(v, X1, X2, h) + _dmix(v, Y1, Y2, h)
    im = _dmix(v, X1, Y2, h) - _dmix(v, Y1, X2, h)
    return HermitianField(a11, a22, 0.25 * (re + 1j * im), "hessian")


def real_to_complex_hessian(R) -> HermitianField:
    """Complex Hessian from a real Hessian array of shape (..., 4, 4)."""
    a11 = 0.25 * (R[..., X1, X1] + R[..., Y1, Y1])
    a22 = 0.25 * (R[..., X2, X2] + R[..., Y2, Y2])
    a12 = 0.25 * ((R[..., X1, X2] + R[..., Y1, Y2]) + 1j * (R[..., X1, Y2] - R[..., Y1, X2]))
    return HermitianField(a11, a22, a12, "hessian")


@dataclass
class MAResult:
    density: MeasureField
    psh_violation: float  # max(0, -min eigenvalue)

    @property
    def values(self) -> np.ndarray:
        return self.density.weights


def ma_measure(u, G: HermitianField, grid: Grid | None = None) -> MAResult:
    """det(G + H u) per node with negative eigenvalues clamped at 0."""
    if isinstance(u, PotentialField):
        grid = u.grid
    if grid is None:
        raise GridError("ma_measure needs a grid for raw arrays")
    M = G + complex_hessian(u, grid)
    lo, hi = M.eigenvalues()
    det = np.maximum(lo, 0.0) * np.maximum(hi, 0.0)
    return MAResult(MeasureField(det), float(max(0.0, -lo.min())))


# --- smooth periodic test fields ----------------------------------------------


@dataclass(frozen=True)
class TrigField:
    """sum_k amp_k cos(2 pi k.x + phase_k) with integer wave vectors k in Z^4."""

    modes: tuple = ()

    def values(self, grid: Grid) -> np.ndarray:
        X = grid.coords()
        out = np.zeros(grid.shape)
        for amp, k, ph in self.modes:
            out += amp * np.cos(2 * np.pi * sum(ki * xi for ki, xi in zip(k, X)) + ph)
        return out

    def real_hessian(self, grid: Grid) -> np.ndarray:
        X = grid.coords()
        R = np.zeros(grid.shape + (4, 4))
        for amp, k, ph in self.modes:
            c = -amp * (2 * np.pi) ** 2 * np.cos(2 * np.pi * sum(ki * xi for ki, xi in zip(k, X)) + ph)
            kk = np.outer(k, k)
            R += c[..., None, None] * kk
        return R

    def complex_hessian(self, grid: Grid) -> HermitianField:
        """Exact (continuum) complex Hessian sampled at the nodes."""
        return real_to_complex_hessian(self.real_hessian(grid))


def random_trig_field(rng: np.random.Generator, amplitude: float, n_modes: int = 3, kmax: int = 1) -> TrigField:
    """Random low-frequency trig field; amplitude bounds the sup of its complex Hessian."""
    modes = []
    for _ in range(n_modes):
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=4))
        if not any(k):
            k = (1, 0, 0, 0)
        modes.append((1.0, k, float(rng.uniform(0, 2 * np.pi))))
    # |complex hessian entries| <= sum pi^2 |k|^2 |amp| per mode
    weight = sum(np.pi**2 * sum(v * v for v in k) for _, k, _ in modes)
    amp = amplitude / weight
    return TrigField(tuple((amp, k, ph) for _, k, ph in modes))


# --- background forms ---------------------------------------------------------


def flat_background(grid: Grid) -> HermitianField:
    z = np.zeros(grid.shape)
    return HermitianField(z + 1.0, z + 1.0, z.astype(complex), "flat", {})


def cosine_degenerate_background(grid: Grid, c: float = 1.0) -> HermitianField:
    """G = I + complex Hessian of (c / (2 pi^2)) (cos 2pi x1 + cos 2pi y1).

    G_11 = 1 - (c/2)(cos 2pi x1 + cos 2pi y1); semipositive for c <= 1 and
    degenerate on {x1 = y1 = 0} when c = 1.  Total mass is 1 for every c.
    """
    if not 0 <= c <= 1:
        raise GridError("cosine-degenerate family needs 0 <= c <= 1")
    pot = TrigField(((c / (2 * np.pi**2), (1, 0, 0, 0), 0.0), (c / (2 * np.pi**2), (0, 1, 0, 0), 0.0)))
    H = pot.complex_hessian(grid)
    G = flat_background(grid) + H
    G.family, G.params = "cosine-degenerate", {"c": c}
    return G


def background(grid: Grid, family: str = "flat", c: float = 1.0) -> HermitianField:
    if family == "flat":
        return flat_background(grid)
    if family in ("cosine", "cosine-degenerate"):
        return cosine_degenerate_background(grid, c)
    raise GridError(f"unknown background family {family!r}")


def uniform_measure(grid: Grid) -> MeasureField:
    return MeasureField(np.ones(grid.shape))


def singular_measure(grid: Grid, power: float, center=(0.0, 0.0, 0.0, 0.0), floor: float | None = None) -> MeasureField:
    """Truncated dist^{-2 power} weight, normalized to total mass 1."""
    d = grid.torus_distance(center)
    floor = grid.h / 2 if floor is None else floor
    w = np.maximum(d, floor) ** (-2.0 * power)
    return MeasureField(w / grid.integrate(w))
