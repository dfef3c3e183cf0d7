import numpy as np
import pytest

from fns.corrector import (
    SpectralCorrector,
    adjoint_apply,
    apply_corrector,
    corrector_columns,
    identity_kernel,
    interpolate_lambda,
    reciprocal_symbol_scale,
    sine_bin_impulse,
)
from fns.errors import IndexOutOfRange
from fns.grids import Grid1D, Grid2D, sine_mode
from fns.stencils import (
    RegionMask,
    apply_stencil,
    assemble_jumping,
    poisson1d_stencil,
    stencil_to_dense,
)


def ones_corrector(grid):
    lam = np.ones((grid.extended_n,) * grid.ndim, dtype=complex)
    return SpectralCorrector(grid, "diagonal", lam)


def random_corrector(grid, seed, kernels=1, ksize=3):
    rng = np.random.default_rng(seed)
    ne = grid.extended_n
    lam = rng.standard_normal((ne,) * grid.ndim) + 1j * rng.standard_normal((ne,) * grid.ndim)
    ks = []
    for _ in range(kernels):
        shape = (1, ksize) if grid.ndim == 1 else (ksize, ksize)
        ks.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    variant = "conv" if ks else "diagonal"
    return SpectralCorrector(grid, variant, lam, tuple(ks))


def test_unit_lambda_is_identity():
    g = Grid2D(7)
    r = np.random.default_rng(0).standard_normal(g.shape)
    out = apply_corrector(ones_corrector(g), r)
    assert np.max(np.abs(out - r)) < 1e-13


def test_zero_input():
    g = Grid2D(7)
    assert np.all(apply_corrector(ones_corrector(g), np.zeros(g.shape)) == 0)


def test_1d_poisson_reciprocal_lambda_is_exact_solver():
    # the three-step fast solver: divide sine coefficients by the analytic
    # eigenvalue ladder; checked against the dense solve
    g = Grid1D(7)
    ne = g.extended_n
    theta = 2.0 * np.pi * np.arange(ne) / ne
    lam_op = (4.0 / g.h**2) * np.sin(theta / 2.0) ** 2
    lam = np.zeros(ne, dtype=complex)
    lam[lam_op > 1e-12] = 1.0 / lam_op[lam_op > 1e-12]
    hc = SpectralCorrector(g, "diagonal", lam)
    f = np.random.default_rng(1).standard_normal(g.n)
    u = apply_corrector(hc, f)
    dense = stencil_to_dense(poisson1d_stencil(g))
    want = np.linalg.solve(dense, f)
    assert np.max(np.abs(u - want)) < 1e-10
    assert np.linalg.norm(dense @ u.real - f) / np.linalg.norm(f) < 1e-10


def test_2d_reciprocal_symbol_exact_on_five_point():
    g = Grid2D(31)
    s = assemble_jumping(np.ones((g.n + 2, g.n + 2)), g)
    hc = SpectralCorrector(g, "diagonal", reciprocal_symbol_scale(s))
    f = np.random.default_rng(2).standard_normal(g.shape)
    u = apply_corrector(hc, f)
    res = np.linalg.norm(f - apply_stencil(s, u)) / np.linalg.norm(f)
    assert res < 1e-9


def test_scale_equivariance_complex():
    g = Grid2D(7)
    hc = random_corrector(g, 3)
    r = np.random.default_rng(4).standard_normal(g.shape)
    c = 1.7 - 2.3j
    lhs = apply_corrector(hc, c * r)
    rhs = c * apply_corrector(hc, r)
    assert np.array_equal(lhs, rhs) or np.max(np.abs(lhs - rhs)) < 1e-14 * np.max(np.abs(rhs))


def test_linearity():
    g = Grid2D(7)
    hc = random_corrector(g, 5)
    rng = np.random.default_rng(6)
    r, s = rng.standard_normal((2,) + g.shape)
    al, be = 0.3, -1.1
    lhs = apply_corrector(hc, al * r + be * s)
    rhs = al * apply_corrector(hc, r) + be * apply_corrector(hc, s)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_conv_identity_kernel_equals_diagonal():
    g = Grid2D(7)
    rng = np.random.default_rng(7)
    ne = g.extended_n
    lam = rng.standard_normal((ne, ne)) + 1j * rng.standard_normal((ne, ne))
    diag = SpectralCorrector(g, "diagonal", lam)
    conv = SpectralCorrector(g, "conv", lam, (identity_kernel(5),))
    r = rng.standard_normal(g.shape)
    assert np.array_equal(apply_corrector(diag, r), apply_corrector(conv, r))


def test_adjoint_diagonal_real_lambda():
    g = Grid2D(7)
    ne = g.extended_n
    lam = np.random.default_rng(8).standard_normal((ne, ne)).astype(complex)
    hc = SpectralCorrector(g, "diagonal", lam)
    rng = np.random.default_rng(9)
    r = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    g_ = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    lhs = np.vdot(g_, apply_corrector(hc, r))
    rhs = np.vdot(adjoint_apply(hc, g_), r)
    assert abs(lhs - rhs) < 1e-11 * abs(lhs)


def test_adjoint_inner_product_full():
    g = Grid2D(15)
    hc = random_corrector(g, 10, kernels=2, ksize=5)
    rng = np.random.default_rng(11)
    r = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    lhs = np.vdot(v, apply_corrector(hc, r))
    rhs = np.vdot(adjoint_apply(hc, v), r)
    assert abs(lhs - rhs) < 1e-11 * abs(lhs)


def test_adjoint_zero():
    g = Grid2D(7)
    assert np.all(adjoint_apply(random_corrector(g, 12), np.zeros(g.shape)) == 0)


def test_region_split_recombination():
    g = Grid2D(7)
    h1 = random_corrector(g, 13)
    h2 = random_corrector(g, 14)
    labels = np.ones(g.shape, dtype=int)
    labels[:, 4:] = 2
    mask = RegionMask(g, labels)
    hc = SpectralCorrector(g, "region_split", parts=(h1, h2), mask=mask)
    r = np.random.default_rng(15).standard_normal(g.shape)
    out = apply_corrector(hc, r)
    want = mask.indicator(1) * apply_corrector(h1, r) + mask.indicator(2) * apply_corrector(h2, r)
    assert np.array_equal(out, want)
    # adjoint consistency
    rng = np.random.default_rng(16)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    lhs = np.vdot(v, apply_corrector(hc, r))
    rhs = np.vdot(adjoint_apply(hc, v), r)
    assert abs(lhs - rhs) < 1e-11 * abs(lhs)


def test_capture_activations():
    g = Grid2D(7)
    hc = random_corrector(g, 17)
    out, act = apply_corrector(hc, np.ones(g.shape), capture=True)
    ne = g.extended_n
    for z in (act.post_f_inv, act.post_c_star, act.post_lambda, act.post_c):
        assert z.shape == (ne, ne)


class TestColumns:
    def test_empty_kernels_gives_sine_mode(self):
        g = Grid2D(7)
        (col,) = corrector_columns(ones_corrector(g), [(2, 3)])
        mode = sine_mode(g, (2, 3))
        assert np.max(np.abs(col - mode)) < 1e-12

    def test_scaled_delta_kernel(self):
        g = Grid2D(7)
        ne = g.extended_n
        lam = np.ones((ne, ne), dtype=complex)
        hc = SpectralCorrector(g, "conv", lam, (2.0 * identity_kernel(3),))
        (col,) = corrector_columns(hc, [(1, 2)])
        assert np.max(np.abs(col - 2.0 * sine_mode(g, (1, 2)))) < 1e-12

    def test_exact_1d_corrector_columns_match_eigenvectors(self):
        g = Grid1D(7)
        hc = ones_corrector(g)
        cols = corrector_columns(hc, [(j,) for j in range(1, g.n + 1)])
        for j, col in enumerate(cols, start=1):
            xi = sine_mode(g, j)
            corr = abs(np.vdot(col, xi)) / (np.linalg.norm(col) * np.linalg.norm(xi))
            assert corr > 0.99

    def test_index_out_of_range(self):
        g = Grid2D(7)
        with pytest.raises(IndexOutOfRange):
            sine_bin_impulse(g, (99, 0))


def test_interpolate_lambda_roundtrip_same_size():
    lam = np.random.default_rng(18).standard_normal((16, 16)) + 0j
    out = interpolate_lambda(lam, 16)
    assert np.array_equal(out, lam)


def test_interpolate_lambda_constant_preserved():
    lam = np.full((16, 16), 2.5 + 0.5j)
    out = interpolate_lambda(lam, 32)
    assert np.allclose(out, 2.5 + 0.5j, atol=1e-14)
