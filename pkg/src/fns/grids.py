"""Uniform interior grids, odd-reflection extension, and unitary FFT primitives.

Conventions used throughout the package:

* An interior field on ``Grid2D(n)`` is an ``(n, n)`` array indexed
  ``values[j, i]`` for the node at ``(x, y) = ((i + 1) h, (j + 1) h)``
  (row-major, x fastest).  Boundary values are implicitly zero.
* The odd extension lives on the ``(n', n')`` periodic lattice with
  ``n' = 2 (n + 1)``; frequency bin ``m`` carries ``theta = 2 pi m / n'``
  wrapped to ``[-pi, pi)``, so bin ``j`` sits at ``theta = pi j h`` and the
  FFT bins align with the Dirichlet sine eigenfrequencies.
* FFTs are unitary in both directions (``1/sqrt(n')`` per axis per
  direction), hence ``F* = F^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NonPowerOfTwoSize


@dataclass(frozen=True)
class Grid1D:
    """n interior nodes on (0, 1) with spacing h = 1/(n+1)."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one interior node, got n={self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def extended_n(self) -> int:
        return 2 * (self.n + 1)

    @property
    def ndim(self) -> int:
        return 1

    @property
    def shape(self) -> tuple:
        return (self.n,)

    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * self.h


@dataclass(frozen=True)
class Grid2D:
    """n x n interior nodes on (0, 1)^2 with spacing h = 1/(n+1)."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one interior node, got n={self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def extended_n(self) -> int:
        return 2 * (self.n + 1)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> tuple:
        return (self.n, self.n)

    def nodes(self) -> tuple:
        """(X, Y) meshgrids over interior nodes, matching field indexing."""
        x = np.arange(1, self.n + 1) * self.h
        return np.meshgrid(x, x, indexing="xy")


def check_field(grid, values) -> np.ndarray:
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise GridMismatch(f"field shape {values.shape} does not match grid {grid.shape}")
    return values


def _odd_extend_axis(a: np.ndarray, axis: int) -> np.ndarray:
    n = a.shape[axis]
    ne = 2 * (n + 1)
    shape = list(a.shape)
    shape[axis] = ne
    out = np.zeros(shape, dtype=np.result_type(a.dtype, np.float64))
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(1, n + 1)
    out[tuple(sl)] = a
    sl[axis] = slice(n + 2, ne)
    out[tuple(sl)] = -np.flip(a, axis=axis)
    return out


def odd_extend(f: np.ndarray, grid=None) -> np.ndarray:
    """Odd-symmetric periodic extension about each wall (size 2(n+1) per axis)."""
    f = np.asarray(f)
    if grid is not None:
        check_field(grid, f)
    out = f
    for axis in range(f.ndim):
        out = _odd_extend_axis(out, axis)
    return out


def restrict(fe: np.ndarray, grid=None) -> np.ndarray:
    """Interior restriction, the left inverse of :func:`odd_extend`."""
    fe = np.asarray(fe)
    if grid is not None and fe.shape != (grid.extended_n,) * grid.ndim:
        raise GridMismatch(f"extended shape {fe.shape} does not match grid n'={grid.extended_n}")
    sl = tuple(slice(1, s // 2) for s in fe.shape)
    return fe[sl]


def flip_periodic(v: np.ndarray, axis: int) -> np.ndarray:
    """Index reversal k -> (-k) mod n' along one axis of a periodic lattice."""
    idx = (-np.arange(v.shape[axis])) % v.shape[axis]
    return np.take(v, idx, axis=axis)


def odd_extend_adjoint(v: np.ndarray) -> np.ndarray:
    """Adjoint of odd_extend as a linear map C^(n^d) -> C^(n'^d)."""
    out = v
    for axis in range(v.ndim):
        out = out - flip_periodic(out, axis)
    sl = tuple(slice(1, s // 2) for s in v.shape)
    return out[sl]


def _check_pow2(shape) -> None:
    for s in shape:
        if s < 2 or (s & (s - 1)) != 0:
            raise NonPowerOfTwoSize(f"transform size {s} is not a power of two")


def fft2(fe: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Unitary FFT over all axes of an extended field (radix-2 sizes only).

    Sizes are gated to powers of two: every supported grid has n = 2**k - 1,
    hence n' = 2(n+1) = 2**(k+1).
    """
    fe = np.asarray(fe)
    _check_pow2(fe.shape)
    if inverse:
        return np.fft.ifftn(fe, norm="ortho")
    return np.fft.fftn(fe, norm="ortho")


def freq_values(extended_n: int) -> np.ndarray:
    """Per-bin frequencies theta = 2 pi m / n' wrapped to [-pi, pi)."""
    m = np.arange(extended_n)
    theta = 2.0 * np.pi * m / extended_n
    theta[theta >= np.pi] -= 2.0 * np.pi
    return theta


def freq_lattice(grid) -> tuple:
    """Frequency meshgrids (theta1, ..., thetad), axes matching extended fields.

    For 2D returns (T1, T2) with T1 varying along axis 1 (x) and T2 along
    axis 0 (y), mirroring the values[j, i] field layout.
    """
    th = freq_values(grid.extended_n)
    if grid.ndim == 1:
        return (th,)
    t1, t2 = np.meshgrid(th, th, indexing="xy")
    return (t1, t2)


def sine_mode(grid, index) -> np.ndarray:
    """Sampled product sine mode sin(j pi x) [* sin(k pi y)] on interior nodes."""
    if grid.ndim == 1:
        j = int(index) if np.ndim(index) == 0 else int(index[0])
        k = np.arange(1, grid.n + 1)
        return np.sin(j * np.pi * grid.h * k)
    j, k = index
    t = np.arange(1, grid.n + 1) * grid.h
    sx = np.sin(j * np.pi * t)
    sy = np.sin(k * np.pi * t)
    return np.outer(sy, sx)


def poisson1d_eigenvalue(grid: Grid1D, j) -> np.ndarray:
    """Analytic eigenvalue ladder of tridiag(-1, 2, -1)/h^2: (4/h^2) sin^2(pi h j / 2)."""
    h = grid.h
    return (4.0 / h**2) * np.sin(np.pi * h * np.asarray(j, dtype=float) / 2.0) ** 2


def dst_solve_poisson_1d(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Solve tridiag(-1,2,-1)/h^2 u = f by sine expansion / eigenvalue division.

    Three steps realized through the odd extension and the unitary FFT:
    expand f in the sine eigenbasis, divide the coefficients by the analytic
    eigenvalues, recombine.
    """
    real_in = np.isrealobj(f)
    f = check_field(grid, np.asarray(f, dtype=np.complex128))
    fe = odd_extend(f)
    spec = fft2(fe)
    ne = grid.extended_n
    theta = 2.0 * np.pi * np.arange(ne) / ne
    lam = (4.0 / grid.h**2) * np.sin(theta / 2.0) ** 2
    mult = np.zeros(ne)
    alive = lam > 1e-14 / grid.h**2
    mult[alive] = 1.0 / lam[alive]  # dead bins (theta=0) carry no odd-signal energy
    u = restrict(fft2(spec * mult, inverse=True))
    if real_in:
        return u.real
    return u
