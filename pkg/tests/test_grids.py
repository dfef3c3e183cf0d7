import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fns.errors import NonPowerOfTwoSize
from fns.grids import (
    Grid1D,
    Grid2D,
    dst_solve_poisson_1d,
    fft2,
    freq_values,
    odd_extend,
    odd_extend_adjoint,
    poisson1d_eigenvalue,
    restrict,
    sine_mode,
)

from _oracles import dft_brute


def test_grid_invariants():
    g = Grid2D(7)
    assert g.h * (g.n + 1) == pytest.approx(1.0, abs=1e-16)
    assert g.extended_n == 16
    g = Grid2D(31)
    assert g.extended_n == 64 and (g.extended_n & (g.extended_n - 1)) == 0


def test_odd_extend_1d_forced_values():
    v = np.array([1.0, 2.0, 3.0])
    ve = odd_extend(v)
    assert np.array_equal(ve, [0, 1, 2, 3, 0, -3, -2, -1])


def test_odd_extend_zero_field():
    g = Grid2D(3)
    assert np.all(odd_extend(np.zeros(g.shape), g) == 0)


@pytest.mark.parametrize("j,k", [(1, 1), (2, 3), (3, 1)])
def test_odd_extend_sine_mode_is_periodic_sinusoid(j, k):
    # the extension of the sampled sine must equal the sinusoid on the full lattice
    g = Grid2D(3)
    ve = odd_extend(sine_mode(g, (j, k)), g)
    q = np.arange(g.extended_n)
    direct = np.outer(np.sin(k * np.pi * g.h * q), np.sin(j * np.pi * g.h * q))
    assert np.allclose(ve, direct, atol=1e-14)


def test_restrict_roundtrip_bit_exact():
    g = Grid2D(7)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(g.shape)
    assert np.array_equal(restrict(odd_extend(f, g), g), f)


def test_extend_restrict_on_odd_symmetric_input():
    g = Grid2D(5)
    fe = odd_extend(np.random.default_rng(1).standard_normal(g.shape), g)
    assert np.array_equal(odd_extend(restrict(fe, g), g), fe)


def test_fft_delta_impulse():
    fe = np.zeros((8, 8), dtype=complex)
    fe[0, 0] = 1.0
    out = fft2(fe)
    assert np.allclose(out, 1.0 / 8.0, atol=1e-15)


def test_fft_roundtrip_unitary():
    rng = np.random.default_rng(2)
    fe = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    back = fft2(fft2(fe), inverse=True)
    assert np.max(np.abs(back - fe)) < 1e-12


def test_fft_rejects_non_power_of_two():
    with pytest.raises(NonPowerOfTwoSize):
        fft2(np.zeros((12, 12)))


def test_fft_matches_brute_force_dft():
    rng = np.random.default_rng(3)
    fe = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.max(np.abs(fft2(fe) - dft_brute(fe))) < 1e-12


def test_sine_mode_spectrum_four_bins():
    # energy exactly on the conjugate-symmetric quartet, verified against the
    # brute-force DFT oracle
    g = Grid2D(7)
    j, k = 2, 3
    fe = odd_extend(sine_mode(g, (j, k)), g)
    spec = dft_brute(fe)
    ne = g.extended_n
    hot = {(k, j), (k, ne - j), (ne - k, j), (ne - k, ne - j)}
    mags = np.abs(spec)
    for m2 in range(ne):
        for m1 in range(ne):
            if (m2, m1) in hot:
                assert mags[m2, m1] > 1e-3
            else:
                assert mags[m2, m1] < 1e-12
    assert np.max(np.abs(fft2(fe) - spec)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    fe = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    a = np.linalg.norm(fe)
    b = np.linalg.norm(fft2(fe))
    assert abs(a - b) <= 1e-12 * a


def test_freq_values_alignment():
    th = freq_values(16)  # n = 7, so bin j must sit at pi j h with h = 1/8
    h = 1.0 / 8.0
    for j in range(8):
        assert th[j] == pytest.approx(np.pi * j * h, abs=1e-15)
    assert th.min() >= -np.pi and th.max() < np.pi


def test_odd_extend_adjoint_inner_product():
    g = Grid2D(7)
    rng = np.random.default_rng(4)
    r = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    lhs = np.vdot(v, odd_extend(r, g))
    rhs = np.vdot(odd_extend_adjoint(v), r)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


class TestDstSolve:
    def test_first_eigenpair_n3(self):
        # lambda_1 = 64 sin^2(pi/8) for h = 1/4; frozen from the dense oracle below
        g = Grid1D(3)
        lam1 = poisson1d_eigenvalue(g, 1)
        assert lam1 == pytest.approx(64.0 * np.sin(np.pi / 8.0) ** 2, rel=1e-15)
        xi1 = sine_mode(g, 1)
        u = dst_solve_poisson_1d(lam1 * xi1, g)
        assert np.max(np.abs(u - xi1)) < 1e-12
        # cross-check against the dense 3x3 solve
        a = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]) / g.h**2
        assert np.max(np.abs(np.linalg.solve(a, lam1 * xi1) - u)) < 1e-10

    def test_zero_rhs(self):
        g = Grid1D(7)
        assert np.all(dst_solve_poisson_1d(np.zeros(7), g) == 0)

    def test_random_rhs_matches_dense_lu(self):
        g = Grid1D(63)
        f = np.random.default_rng(5).standard_normal(63)
        a = (np.diag(np.full(63, 2.0)) + np.diag(np.full(62, -1.0), 1)
             + np.diag(np.full(62, -1.0), -1)) / g.h**2
        dense = np.linalg.solve(a, f)
        u = dst_solve_poisson_1d(f, g)
        assert np.linalg.norm(u - dense) / np.linalg.norm(dense) < 1e-9
        # residual form of the same contract
        assert np.linalg.norm(a @ u - f) / np.linalg.norm(f) < 1e-10
