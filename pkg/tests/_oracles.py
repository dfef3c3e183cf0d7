"""Brute-force reference computations the production code is checked against.

Everything here is deliberately slow and direct: explicit DFT sums, dense
solves, periodic hand-rolled stencil application, and a quadrature-based
SDFEM element assembly.  None of it shares code with the paths it verifies.
"""

import numpy as np


def dft_brute(fe):
    """O(n'^4) forward DFT with unitary normalization (2D), or O(n'^2) in 1D."""
    fe = np.asarray(fe, dtype=complex)
    if fe.ndim == 1:
        n = fe.shape[0]
        k = np.arange(n)
        out = np.zeros(n, dtype=complex)
        for m in range(n):
            out[m] = np.sum(fe * np.exp(-2j * np.pi * m * k / n))
        return out / np.sqrt(n)
    n0, n1 = fe.shape
    out = np.zeros((n0, n1), dtype=complex)
    j = np.arange(n0)[:, None]
    i = np.arange(n1)[None, :]
    for m0 in range(n0):
        for m1 in range(n1):
            phase = np.exp(-2j * np.pi * (m0 * j / n0 + m1 * i / n1))
            out[m0, m1] = np.sum(fe * phase)
    return out / np.sqrt(n0 * n1)


def apply_block_periodic(block, z):
    """Constant 9-point stencil applied on a periodic lattice (2D)."""
    out = np.zeros_like(z, dtype=complex)
    for a in range(3):
        for b in range(3):
            dy, dx = a - 1, b - 1
            out += block[a, b] * np.roll(z, (-dy, -dx), axis=(0, 1))
    return out


def fourier_mode(extended_n, m1, m2):
    """exp(i theta . k) sampled on the periodic lattice, theta = 2 pi m / n'."""
    k = np.arange(extended_n)
    ex = np.exp(2j * np.pi * m1 * k / extended_n)
    ey = np.exp(2j * np.pi * m2 * k / extended_n)
    return np.outer(ey, ex)


def gauss2_points_weights():
    g = 1.0 / np.sqrt(3.0)
    pts = [(-g, -g), (g, -g), (-g, g), (g, g)]
    wts = [1.0, 1.0, 1.0, 1.0]
    return pts, wts


def sdfem_element_matrix(eps, wx, wy, delta, h):
    """4x4 bilinear SUPG element matrix on [0,h]^2 by 2x2 Gauss quadrature.

    Local node order: (0,0), (h,0), (0,h), (h,h).  All integrands are at most
    biquadratic, so the quadrature is exact.
    """

    def shp(xi, eta):
        vals = np.array([
            (1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta,
        ])
        dxi = np.array([-(1 - eta), (1 - eta), -eta, eta])
        deta = np.array([-(1 - xi), -xi, (1 - xi), xi])
        return vals, dxi / h, deta / h  # physical-space gradients

    pts, wts = gauss2_points_weights()
    ke = np.zeros((4, 4))
    jac = (h / 2.0) ** 2  # reference [-1,1]^2 -> [0,h]^2
    for (gx, gy), w in zip(pts, wts):
        xi = (gx + 1) / 2.0
        eta = (gy + 1) / 2.0
        vals, dx, dy = shp(xi, eta)
        wgrad = wx * dx + wy * dy
        ke += w * jac * (
            eps * (np.outer(dx, dx) + np.outer(dy, dy))
            + np.outer(wgrad, vals).T
            + delta * np.outer(wgrad, wgrad)
        )
    return ke


def sdfem_dense(eps, wx, wy, delta, n):
    """Assembled SDFEM matrix on the n x n interior nodes (Dirichlet walls)."""
    h = 1.0 / (n + 1)
    nn = n + 2
    big = np.zeros((nn * nn, nn * nn))
    ke = sdfem_element_matrix(eps, wx, wy, delta, h)
    for ey in range(n + 1):
        for ex in range(n + 1):
            loc = [ey * nn + ex, ey * nn + ex + 1, (ey + 1) * nn + ex, (ey + 1) * nn + ex + 1]
            for p in range(4):
                for q in range(4):
                    big[loc[p], loc[q]] += ke[p, q]
    keep = [j * nn + i for j in range(1, n + 1) for i in range(1, n + 1)]
    return big[np.ix_(keep, keep)]


def bilinear_diffusion_dense(a, n):
    """Assembled bilinear FEM matrix of -div(a grad u), per-element a (n+1, n+1)."""
    h = 1.0 / (n + 1)
    nn = n + 2
    big = np.zeros((nn * nn, nn * nn))
    pts, wts = gauss2_points_weights()

    def grads(xi, eta):
        dxi = np.array([-(1 - eta), (1 - eta), -eta, eta]) / h
        deta = np.array([-(1 - xi), -xi, (1 - xi), xi]) / h
        return dxi, deta

    jac = (h / 2.0) ** 2
    ke0 = np.zeros((4, 4))
    for (gx, gy), w in zip(pts, wts):
        dx, dy = grads((gx + 1) / 2, (gy + 1) / 2)
        ke0 += w * jac * (np.outer(dx, dx) + np.outer(dy, dy))
    for ey in range(n + 1):
        for ex in range(n + 1):
            loc = [ey * nn + ex, ey * nn + ex + 1, (ey + 1) * nn + ex, (ey + 1) * nn + ex + 1]
            ke = a[ey, ex] * ke0
            for p in range(4):
                for q in range(4):
                    big[loc[p], loc[q]] += ke[p, q]
    keep = [j * nn + i for j in range(1, n + 1) for i in range(1, n + 1)]
    return big[np.ix_(keep, keep)]
