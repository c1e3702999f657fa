import numpy as np
import pytest

from cmastab import capacity as cp
from cmastab import grid as gl
from cmastab.grid import Grid
from cmastab.solver import min_eigenvalue

ENV_TOL = 1e-8


@pytest.fixture(scope="module")
def g8():
    return Grid(8)


@pytest.fixture(scope="module")
def flat8(g8):
    return gl.flat_background(g8)


def test_empty_set(g8, flat8):
    K = np.zeros(g8.shape, bool)
    assert cp.capacity(K, flat8, g8) == 0.0
    assert cp.capacity(K, flat8, g8, full=True) == (0.0, None)


def test_full_torus_envelope_is_minus_one(g8, flat8):
    K = np.ones(g8.shape, bool)
    val, env = cp.capacity(K, flat8, g8, full=True)
    assert np.all(env.u.values == -1.0)
    assert val == pytest.approx(flat8.total_mass(g8), abs=1e-8)
    assert cp.capacity(K, flat8, g8, method="direct") == pytest.approx(1.0, abs=1e-8)


def test_unknown_method(g8, flat8):
    with pytest.raises(ValueError):
        cp.capacity(cp.ball(g8, 0.2), flat8, g8, method="exact")


def test_envelope_is_feasible_and_maximal(g8, flat8):
    K = cp.ball(g8, 0.2)
    env = cp.relative_extremal(K, flat8, g8)
    u = env.u.values
    assert env.converged
    assert u.max() <= 0 and np.all(u[K] <= -1 + 1e-15)
    assert min_eigenvalue(env.u, flat8).min() >= -1e-8
    # maximality: raising any node off the constraints breaks psh or an obstacle
    lmin = min_eigenvalue(env.u, flat8)
    free = (~K) & (u < -1e-9)
    assert np.abs(lmin[free]).max() < 1e-6


def test_ball_masks(g8):
    assert cp.ball(g8, 0.0).sum() == 1
    assert cp.ball(g8, g8.h).sum() == 1 + 8
    assert cp.ball(g8, 10.0).all()


@pytest.mark.parametrize("family", ["flat", "cosine"])
def test_monotone_on_nested_balls(g8, family):
    G = gl.background(g8, family, 1.0)
    radii = [0.0, 0.125, 0.2, 0.3, 0.4, 0.5, 0.7, 1.1]
    caps = [cp.capacity(cp.ball(g8, r), G, g8) for r in radii]
    assert np.all(np.diff(caps) >= -ENV_TOL)
    assert caps[-1] == pytest.approx(G.total_mass(g8), abs=1e-8)
    assert all(0 <= c <= G.total_mass(g8) + 1e-12 for c in caps)


def test_subadditive(g8, flat8):
    K1 = cp.ball(g8, 0.13, (0.0, 0.0, 0.0, 0.0))
    K2 = cp.ball(g8, 0.13, (0.5, 0.5, 0.5, 0.5))
    K3 = cp.ball(g8, 0.2, (0.125, 0.0, 0.0, 0.0))  # overlaps K1
    for A, B in ((K1, K2), (K1, K3), (K2, K3)):
        cu = cp.capacity(A | B, flat8, g8)
        assert cu <= cp.capacity(A, flat8, g8) + cp.capacity(B, flat8, g8) + ENV_TOL
        assert cu >= max(cp.capacity(A, flat8, g8), cp.capacity(B, flat8, g8)) - ENV_TOL


def test_translation_invariant_under_flat_background(g8, flat8):
    a = cp.capacity(cp.ball(g8, 0.2, (0, 0, 0, 0)), flat8, g8)
    b = cp.capacity(cp.ball(g8, 0.2, (0.25, 0.5, 0.125, 0.0)), flat8, g8)
    assert a == pytest.approx(b, abs=1e-9)


def test_direct_quadrature_overshoots():
    # the diagnostic "direct" sum picks up stencil mass across the boundary kink
    g = Grid(16)
    G = gl.flat_background(g)
    K = cp.ball(g, 0.3)
    comp = cp.capacity(K, G, g)
    direct = cp.capacity(K, G, g, method="direct")
    assert comp <= 1 + 1e-12
    assert direct > comp
