"""Stability-exponent machinery.

The capacity-to-sup-norm modulus ``kappa(r)`` built from a growth function
``Q(y) = scale * y**m``, its inverse, the perturbation scale
``gamma(t) = C * kappa^{-1}(t)``, and the ``beta_k`` recurrence whose
limit controls the stability exponent ``1/(beta + eps)``.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class ExponentError(ValueError):
    """Invalid parameters for the exponent machinery."""


class InadmissibleSchedule(ExponentError):
    """A delta-schedule for which the beta sequence fails to decrease."""


@dataclass(frozen=True)
class GrowthFunction:
    """Monomial growth ``Q(y) = scale * y**m``."""

    m: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ExponentError(f"growth power must be positive, got m={self.m}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ExponentError(f"growth scale must be positive, got {self.scale}")

    def __call__(self, y):
        return self.scale * np.power(y, self.m)


@dataclass(frozen=True)
class KappaParams:
    n: int
    A: float
    C_n: float
    Q: GrowthFunction

    def __post_init__(self):
        _check_dimension(self.n)
        if not self.A > 0:
            raise ExponentError(f"A must be positive, got {self.A}")
        if not self.C_n > 0:
            raise ExponentError(f"C_n must be positive, got {self.C_n}")

    @property
    def prefactor(self) -> float:
        # C_n A^{1/n} scale^{-1/n}
        return self.C_n * self.A ** (1.0 / self.n) * self.Q.scale ** (-1.0 / self.n)

    @property
    def power(self) -> float:
        """Exponent of r in kappa(r) for the monomial family."""
        return self.Q.m / self.n**2


def _check_dimension(n):
    if int(n) != n or n < 2:
        raise ExponentError(
            f"complex dimension must be an integer >= 2, got n={n} "
            "(n=1 is a Riemann surface, where the operator is the Laplacian)"
        )


def kappa(r: float, p: KappaParams, method: str = "closed") -> float:
    """kappa(r) = C_n A^{1/n} (int_{r^{-1/n}}^inf dy / (y Q(y)^{1/n}) + Q(r^{-1/n})^{-1/n}).

    ``method="closed"`` uses the antiderivative of the monomial integrand,
    ``method="quad"`` integrates numerically with a cutoff chosen so the
    dropped tail is below 1e-12 relative to the integral.
    """
    if not (r > 0 and math.isfinite(r)):
        raise ExponentError(f"kappa needs r > 0, got {r}")
    n, m = p.n, p.Q.m
    if method == "closed":
        return p.prefactor * (n / m + 1.0) * r**p.power
    if method != "quad":
        raise ExponentError(f"unknown kappa method {method!r}")

    y0 = r ** (-1.0 / n)
    # tail int_Y^inf y^{-1} Q^{-1/n} = scale^{-1/n} (n/m) Y^{-m/n}; ratio to the
    # full integral from y0 is (y0/Y)^{m/n}
    log_y0 = math.log(y0)
    log_ymax = log_y0 + 12.0 * math.log(10.0) * n / m
    # substitute y = e^u: integrand becomes Q(e^u)^{-1/n}
    scale_r = p.Q.scale ** (-1.0 / n)

    def integrand(u):
        return scale_r * math.exp(-m * u / n)

    val, _ = integrate.quad(integrand, log_y0, log_ymax, epsabs=0.0, epsrel=1e-13, limit=200)
    boundary = float(p.Q(y0)) ** (-1.0 / n)
    return p.C_n * p.A ** (1.0 / n) * (val + boundary)


def kappa_inverse(t: float, p: KappaParams, method: str = "closed") -> float:
    """Inverse of kappa.

    ``method="bisect"`` brackets the root by exponential expansion and bisects
    in log r (at most 200 iterations, relative tolerance 1e-10 on kappa).
    """
    if not (t > 0 and math.isfinite(t)):
        raise ExponentError(f"kappa_inverse needs t > 0, got {t}")
    if method == "closed":
        return (t / (p.prefactor * (p.n / p.Q.m + 1.0))) ** (1.0 / p.power)
    if method != "bisect":
        raise ExponentError(f"unknown kappa_inverse method {method!r}")

    lo, hi = 0.0, 0.0  # bracket in log r
    while kappa(math.exp(lo), p) > t:
        if lo <= -700.0:
            raise ExponentError(f"t={t} below the bracket of kappa")
        lo = max(lo - 2.0 * (1.0 - lo), -700.0)
    while kappa(math.exp(hi), p) < t:
        if hi >= 700.0:
            raise ExponentError(f"t={t} above the bracket of kappa")
        hi = min(hi + 2.0 * (1.0 + hi), 700.0)

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        k = kappa(math.exp(mid), p)
        if abs(k - t) <= 1e-10 * t:
            return math.exp(mid)
        if k < t:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def gamma(t: float, C: float, p: KappaParams, method: str = "closed") -> float:
    """gamma(t) = C kappa^{-1}(t); increasing with gamma(0+) = 0."""
    if not C > 0:
        raise ExponentError(f"gamma needs C > 0, got {C}")
    return C * kappa_inverse(t, p, method=method)


# --- beta recurrence -------------------------------------------------------


def beta_limit(n: int, eps: float) -> float:
    """Positive root of A (1 + 2n / (A (A + eps))) = n + 2."""
    _check_dimension(n)
    if not eps >= 0:
        raise ExponentError(f"eps must be >= 0, got {eps}")
    disc = (n - 2) ** 2 + 2 * (n + 2) * eps + eps * eps
    return 0.5 * (n + 2 - eps + math.sqrt(disc))


def beta_limit_n2_formula(n: int, eps: float) -> float:
    """(n+2-eps+sqrt((n-2-eps)^2+8 eps))/2: solves the limit equation only for n = 2."""
    _check_dimension(n)
    return 0.5 * (n + 2 - eps + math.sqrt((n - 2 - eps) ** 2 + 8 * eps))


def beta_limit_residual(A: float, n: int, eps: float) -> float:
    return A * (1.0 + 2.0 * n / (A * (A + eps))) - (n + 2)


@dataclass
class RecurrenceState:
    n: int
    eps: float
    deltas: np.ndarray
    betas: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        _check_dimension(self.n)
        if not self.eps >= 0:
            raise ExponentError(f"eps must be >= 0, got {self.eps}")
        self.deltas = np.asarray(self.deltas, dtype=float)
        if np.any(self.deltas < 0):
            raise ExponentError("delta schedule must be nonnegative")

    @property
    def beta0(self) -> float:
        return float(self.n + 2)

    def alphas(self) -> np.ndarray:
        """alpha_k = 1 - (delta_k + beta_k n/(n+2)) / (n+2+eps), k >= 1."""
        n = self.n
        d = self.deltas[1 : len(self.betas)]
        b = self.betas[1:]
        return 1.0 - (d + b * n / (n + 2)) / (n + 2 + self.eps)


def _step(beta, n, shift, const, delta):
    # beta_{k+1} (1 + 2n/(beta (beta + shift))) = const + 5 delta - 2 delta/(beta + shift)
    return (const + 5.0 * delta - 2.0 * delta / (beta + shift)) / (
        1.0 + 2.0 * n / (beta * (beta + shift))
    )


def _iterate(beta0, n, shift, const, deltas, k_max):
    betas = np.empty(k_max + 1)
    betas[0] = beta0
    for k in range(k_max):
        betas[k + 1] = _step(betas[k], n, shift, const, deltas[k + 1])
    return betas


def _is_decreasing(betas, limit):
    # strict decrease until the sequence reaches the fixed point in floating point
    for a, b in zip(betas[:-1], betas[1:]):
        if b < a:
            continue
        if abs(b - a) <= 8 * np.finfo(float).eps * abs(a) and abs(a - limit) <= 1e-12 * limit:
            continue
        return False
    return True


def default_deltas(n: int, eps: float, k_max: int, *, shift=None, const=None) -> np.ndarray:
    """delta_k = delta_0 2^{-k}, delta_0 the largest 2^{-j} giving beta_1 < beta_0."""
    shift = eps if shift is None else shift
    const = n + 2 if const is None else const
    beta0 = float(n + 2)
    for j in range(60):
        d0 = 2.0**-j
        if _step(beta0, n, shift, const, d0 / 2) < beta0:
            break
    else:  # pragma: no cover - 2^-60 always works
        d0 = 0.0
    return d0 * 2.0 ** -np.arange(k_max + 1, dtype=float)


@dataclass
class BetaRun:
    betas: np.ndarray  # beta_1 .. beta_kmax
    deltas: np.ndarray  # delta_0 .. delta_kmax
    limit: float
    gap: float
    decreasing: bool

    @property
    def iterations(self) -> int:
        return len(self.betas)


def beta_sequence(state: RecurrenceState, k_max: int) -> BetaRun:
    """Iterate the beta recurrence starting from beta_0 = n + 2.

    If ``state.deltas`` is empty the default geometric schedule is used.
    Raises InadmissibleSchedule when the sequence fails to decrease.
    """
    n, eps = state.n, state.eps
    if k_max < 1:
        raise ExponentError("k_max must be >= 1")
    deltas = state.deltas if state.deltas.size else default_deltas(n, eps, k_max)
    if deltas.size < k_max + 1:
        raise ExponentError(f"delta schedule has {deltas.size} entries, need {k_max + 1}")
    betas = _iterate(state.beta0, n, eps, n + 2, deltas, k_max)
    limit = beta_limit(n, eps)
    state.deltas, state.betas = deltas, betas
    if not _is_decreasing(betas, limit):
        raise InadmissibleSchedule(
            f"beta sequence not decreasing for n={n}, eps={eps}: "
            f"first betas {betas[:4].round(6).tolist()}"
        )
    return BetaRun(betas[1:], deltas, limit, abs(betas[-1] - limit), True)


@dataclass(frozen=True)
class ChiParams:
    n: int
    chi: float

    def __post_init__(self):
        _check_dimension(self.n)
        if not self.chi > 0:
            raise ExponentError(f"chi must be positive, got {self.chi}")

    @property
    def shift(self) -> float:
        return self.n / self.chi

    @property
    def const(self) -> float:
        c = self.shift
        return self.n + 2 - c / (self.n + c)


@dataclass
class ChiRun:
    betas: np.ndarray
    deltas: np.ndarray
    fixed_point: float  # closed-form fixed point of the recurrence as written
    observed_limit: float
    claimed_denominator: float  # n + n/chi


def chi_fixed_point(p: ChiParams) -> float:
    """Positive root of A + 2n/(A + n/chi) = n + 2 - (n/chi)/(n + n/chi)."""
    c, K, n = p.shift, p.const, p.n
    b = c - K
    return 0.5 * (-b + math.sqrt(b * b - 4.0 * (2.0 * n - K * c)))


def chi_beta_sequence(p: ChiParams, deltas, k_max: int) -> ChiRun:
    """The fixed-chi variant of the beta recurrence (eps replaced by n/chi)."""
    if k_max < 1:
        raise ExponentError("k_max must be >= 1")
    deltas = np.asarray(deltas if deltas is not None else [], dtype=float)
    if deltas.size == 0:
        deltas = default_deltas(p.n, p.shift, k_max, shift=p.shift, const=p.const)
    if deltas.size < k_max + 1:
        raise ExponentError(f"delta schedule has {deltas.size} entries, need {k_max + 1}")
    if np.any(deltas < 0):
        raise ExponentError("delta schedule must be nonnegative")
    betas = _iterate(float(p.n + 2), p.n, p.shift, p.const, deltas, k_max)
    fp = chi_fixed_point(p)
    if not _is_decreasing(betas, fp):
        raise InadmissibleSchedule(f"chi beta sequence not decreasing for {p}")
    return ChiRun(betas[1:], deltas, fp, float(betas[-1]), p.n + p.shift)


# --- reference exponents ----------------------------------------------------


def reference_exponents(n: int, eps: float) -> dict[str, float]:
    """Stability exponents e in ||phi - psi||_inf <= c ||f - g||_1^e."""
    _check_dimension(n)
    return {
        "step1": 1.0 / (n + 3 + eps),
        "improved": 1.0 / (n + 2 + eps),
        "optimal": 1.0 / (n + eps),
        "sharp_bound": 1.0 / n,
    }


def chi_exponent(n: int, chi: float, eps: float) -> float:
    return 1.0 / (n + n / chi + eps)


def egz_exponent(n: int, s: float, p: float, eps: float) -> float:
    """s / (n q + s + eps) with q = p/(p-1) the Hoelder conjugate of p."""
    _check_dimension(n)
    if not s > 0:
        raise ExponentError(f"s must be positive, got {s}")
    if not p > 1:
        raise ExponentError(f"p must exceed 1, got {p}")
    q = p / (p - 1.0)
    if math.isinf(s):
        return 1.0
    return s / (n * q + s + eps)
