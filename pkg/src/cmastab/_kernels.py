"""Compiled per-node kernels for the Gauss-Seidel sweeps.

At a node x the discrete complex Hessian is M(x) - (u(x)/h^2) I, where M
collects every stencil term except the centre value.  All sweeps visit
nodes in lexicographic order starting from ``origin``.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _local(u, i, j, k, l, N, inv4):
    ip, im = (i + 1) % N, (i - 1) % N
    jp, jm = (j + 1) % N, (j - 1) % N
    kp, km = (k + 1) % N, (k - 1) % N
    lp, lm = (l + 1) % N, (l - 1) % N
    s1 = u[ip, j, k, l] + u[im, j, k, l] + u[i, jp, k, l] + u[i, jm, k, l]
    s2 = u[i, j, kp, l] + u[i, j, km, l] + u[i, j, k, lp] + u[i, j, k, lm]
    x1x2 = u[ip, j, kp, l] - u[ip, j, km, l] - u[im, j, kp, l] + u[im, j, km, l]
    y1y2 = u[i, jp, k, lp] - u[i, jp, k, lm] - u[i, jm, k, lp] + u[i, jm, k, lm]
    x1y2 = u[ip, j, k, lp] - u[ip, j, k, lm] - u[im, j, k, lp] + u[im, j, k, lm]
    y1x2 = u[i, jp, kp, l] - u[i, jp, km, l] - u[i, jm, kp, l] + u[i, jm, km, l]
    m11 = s1 * inv4
    m22 = s2 * inv4
    m12r = (x1x2 + y1y2) * inv4 * 0.25
    m12i = (x1y2 - y1x2) * inv4 * 0.25
    return m11, m22, m12r, m12i


@njit(cache=True, inline="always")
def _eig(a, d, br, bi):
    m = 0.5 * (a + d)
    rad = math.sqrt(0.25 * (a - d) * (a - d) + br * br + bi * bi)
    return m - rad, m + rad


@njit(cache=True)
def ma_sweep(u, g11, g22, g12r, g12i, r, scale, h, omega, o0, o1, o2, o3):
    """One Gauss-Seidel sweep of det(G + H u) = scale * r; returns max |update|."""
    N = u.shape[0]
    inv4 = 0.25 / (h * h)
    h2 = h * h
    change = 0.0
    for a in range(N):
        i = (a + o0) % N
        for b in range(N):
            j = (b + o1) % N
            for c in range(N):
                k = (c + o2) % N
                for e in range(N):
                    l = (e + o3) % N
                    m11, m22, m12r, m12i = _local(u, i, j, k, l, N, inv4)
                    A = g11[i, j, k, l] + m11
                    D = g22[i, j, k, l] + m22
                    br = g12r[i, j, k, l] + m12r
                    bi = g12i[i, j, k, l] + m12i
                    mid = 0.5 * (A + D)
                    disc = 0.25 * (A - D) * (A - D) + br * br + bi * bi + scale * r[i, j, k, l]
                    s = mid - math.sqrt(disc)
                    old = u[i, j, k, l]
                    new = old + omega * (h2 * s - old)
                    u[i, j, k, l] = new
                    dd = abs(new - old)
                    if dd > change:
                        change = dd
    return change


@njit(cache=True)
def obstacle_sweep(u, g11, g22, g12r, g12i, obstacle, h, o0, o1, o2, o3):
    """u <- min(obstacle, h^2 lambda_min(M)); returns max |update|."""
    N = u.shape[0]
    inv4 = 0.25 / (h * h)
    h2 = h * h
    change = 0.0
    for a in range(N):
        i = (a + o0) % N
        for b in range(N):
            j = (b + o1) % N
            for c in range(N):
                k = (c + o2) % N
                for e in range(N):
                    l = (e + o3) % N
                    m11, m22, m12r, m12i = _local(u, i, j, k, l, N, inv4)
                    lo, hi = _eig(
                        g11[i, j, k, l] + m11,
                        g22[i, j, k, l] + m22,
                        g12r[i, j, k, l] + m12r,
                        g12i[i, j, k, l] + m12i,
                    )
                    new = min(obstacle[i, j, k, l], h2 * lo)
                    dd = abs(new - u[i, j, k, l])
                    if dd > change:
                        change = dd
                    u[i, j, k, l] = new
    return change


@njit(cache=True)
def ma_fields(u, g11, g22, g12r, g12i, h, det_out, lmin_out):
    """Clamped det(G + H u) and lambda_min(G + H u) at every node."""
    N = u.shape[0]
    inv4 = 0.25 / (h * h)
    ih2 = 1.0 / (h * h)
    for i in range(N):
        for j in range(N):
            for k in range(N):
                for l in range(N):
                    m11, m22, m12r, m12i = _local(u, i, j, k, l, N, inv4)
                    cen = u[i, j, k, l] * ih2
                    lo, hi = _eig(
                        g11[i, j, k, l] + m11 - cen,
                        g22[i, j, k, l] + m22 - cen,
                        g12r[i, j, k, l] + m12r,
                        g12i[i, j, k, l] + m12i,
                    )
                    det_out[i, j, k, l] = max(lo, 0.0) * max(hi, 0.0)
                    lmin_out[i, j, k, l] = lo


def split(G):
    """Contiguous float arrays (g11, g22, Re g12, Im g12) for the kernels."""
    return (
        np.ascontiguousarray(G.a11, dtype=np.float64),
        np.ascontiguousarray(G.a22, dtype=np.float64),
        np.ascontiguousarray(G.a12.real, dtype=np.float64),
        np.ascontiguousarray(G.a12.imag, dtype=np.float64),
    )
