"""Per-node compact stencils for the four PDE families, plus samplers and RHS kinds.

A stencil stores, for every interior node, the coefficients coupling it to
its compact neighborhood: 9 offsets in 2D, 3 in 1D.  The discrete system is
written ``S u = h^2 f`` for all FEM/FV families here; the h^2 on the
right-hand side is the caller's concern.

Display convention for 2D constructor input: a 3x3 block whose first row is
the north (+y) neighbors, columns running west to east, i.e. the usual
stencil notation [NW N NE; W C E; SW S SE].  Internally coefficients are
indexed by offsets (dy, dx) in {-1, 0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    GridMismatch,
    NonPositiveCoefficient,
    NotConstantStencil,
)
from .grids import Grid1D, Grid2D, check_field


@dataclass(frozen=True)
class StencilField:
    """Per-node compact stencil: coeffs[..., dy+1, dx+1] couples to u[j+dy, i+dx].

    1D stencils use coeffs shape (n, 3) with coeffs[..., dx+1].
    Boundary-touching offsets reference implicit zero Dirichlet values.
    """

    grid: object
    coeffs: np.ndarray

    def __post_init__(self):
        want = self.grid.shape + (3,) * self.grid.ndim
        if self.coeffs.shape != want:
            raise GridMismatch(f"stencil coeffs shape {self.coeffs.shape}, expected {want}")

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def center(self) -> np.ndarray:
        """Per-node center coefficient."""
        idx = (Ellipsis,) + (1,) * self.ndim
        return self.coeffs[idx]

    def is_constant(self) -> bool:
        flat = self.coeffs.reshape(-1, *self.coeffs.shape[self.ndim:])
        return bool(np.all(flat == flat[0]))

    def constant_coeffs(self) -> np.ndarray:
        """The shared (3[,3]) coefficient block; raises if spatially varying."""
        if not self.is_constant():
            raise NotConstantStencil("stencil has spatially varying coefficients")
        idx = (0,) * self.ndim
        return self.coeffs[idx]


def display_to_offsets(block: np.ndarray) -> np.ndarray:
    """Convert display-order [NW N NE; W C E; SW S SE] to (dy, dx) indexing."""
    block = np.asarray(block, dtype=float)
    if block.shape != (3, 3):
        raise ValueError("display block must be 3x3")
    return block[::-1, :].copy()  # row 0 becomes dy=-1 (south), row 2 dy=+1 (north)


def constant_stencil(grid, block_display: np.ndarray) -> StencilField:
    """Constant-coefficient 2D stencil from a display-order 3x3 block."""
    off = display_to_offsets(block_display)
    coeffs = np.broadcast_to(off, grid.shape + (3, 3)).copy()
    return StencilField(grid, coeffs)


def constant_stencil_1d(grid: Grid1D, taps) -> StencilField:
    """Constant 1D stencil from (west, center, east) taps."""
    taps = np.asarray(taps, dtype=float)
    coeffs = np.broadcast_to(taps, grid.shape + (3,)).copy()
    return StencilField(grid, coeffs)


def poisson1d_stencil(grid: Grid1D) -> StencilField:
    """tridiag(-1, 2, -1)/h^2, the 1D Dirichlet Laplacian."""
    h2 = grid.h**2
    return constant_stencil_1d(grid, np.array([-1.0, 2.0, -1.0]) / h2)


# ---------------------------------------------------------------------------
# application


def apply_stencil(stencil: StencilField, u: np.ndarray) -> np.ndarray:
    """Matrix-free S @ u with implicit zero Dirichlet halo."""
    u = check_field(stencil.grid, u)
    c = stencil.coeffs
    out = np.zeros_like(u, dtype=np.result_type(u.dtype, c.dtype))
    if stencil.ndim == 1:
        n = u.shape[0]
        up = np.zeros(n + 2, dtype=out.dtype)
        up[1:-1] = u
        for a in range(3):
            out += c[:, a] * up[a:a + n]
        return out
    n0, n1 = u.shape
    up = np.zeros((n0 + 2, n1 + 2), dtype=out.dtype)
    up[1:-1, 1:-1] = u
    for a in range(3):
        for b in range(3):
            out += c[:, :, a, b] * up[a:a + n0, b:b + n1]
    return out


def apply_stencil_adjoint(stencil: StencilField, v: np.ndarray) -> np.ndarray:
    """Conjugate-transpose application: (S^H v)(x) = sum_k conj(c_{-k}(x+k)) v(x+k)."""
    v = check_field(stencil.grid, v)
    c = stencil.coeffs
    out = np.zeros_like(v, dtype=np.result_type(v.dtype, c.dtype, np.complex128)
                        if np.iscomplexobj(v) or np.iscomplexobj(c) else np.result_type(v.dtype, c.dtype))
    if stencil.ndim == 1:
        n = v.shape[0]
        for a in range(3):
            dx = a - 1
            p = np.conj(c[:, 2 - a]) * v  # c_{-k} at the neighbor node
            pp = np.zeros(n + 2, dtype=out.dtype)
            pp[1:-1] = p
            out += pp[1 + dx:1 + dx + n]
        return out
    n0, n1 = v.shape
    for a in range(3):
        for b in range(3):
            dy, dx = a - 1, b - 1
            p = np.conj(c[:, :, 2 - a, 2 - b]) * v
            pp = np.zeros((n0 + 2, n1 + 2), dtype=out.dtype)
            pp[1:-1, 1:-1] = p
            out += pp[1 + dy:1 + dy + n0, 1 + dx:1 + dx + n1]
    return out


def stencil_to_dense(stencil: StencilField) -> np.ndarray:
    """Explicit dense matrix of the stencil operator (small grids only)."""
    if stencil.ndim == 1:
        n = stencil.grid.n
        a = np.zeros((n, n), dtype=stencil.coeffs.dtype)
        for b in range(3):
            dx = b - 1
            for i in range(n):
                if 0 <= i + dx < n:
                    a[i, i + dx] = stencil.coeffs[i, b]
        return a
    n = stencil.grid.n
    big = np.zeros((n * n, n * n), dtype=stencil.coeffs.dtype)
    for a in range(3):
        for b in range(3):
            dy, dx = a - 1, b - 1
            for j in range(n):
                jj = j + dy
                if not 0 <= jj < n:
                    continue
                for i in range(n):
                    ii = i + dx
                    if 0 <= ii < n:
                        big[j * n + i, jj * n + ii] = stencil.coeffs[j, i, a, b]
    return big


def mean_coeff_block(stencil: StencilField, node_mask: np.ndarray | None = None) -> np.ndarray:
    """Arithmetic per-offset mean of the coefficients, optionally over masked nodes."""
    c = stencil.coeffs
    if node_mask is None:
        return c.mean(axis=tuple(range(stencil.ndim)))
    sel = c[node_mask]
    if sel.size == 0:
        return c.mean(axis=tuple(range(stencil.ndim)))
    return sel.mean(axis=0)


# ---------------------------------------------------------------------------
# assemblers


def assemble_random_diffusion(a: np.ndarray, grid: Grid2D) -> StencilField:
    """Bilinear-FEM stencil of -div(a grad u) with per-element coefficients.

    ``a`` holds one value per element, shape (n+1, n+1), a[ey, ex] on the
    square [ex h, (ex+1) h] x [ey h, (ey+1) h].
    """
    a = np.asarray(a, dtype=float)
    n = grid.n
    if a.shape != (n + 1, n + 1):
        raise GridMismatch(f"element coefficients must be {(n + 1, n + 1)}, got {a.shape}")
    if np.any(a <= 0):
        raise NonPositiveCoefficient("diffusion coefficient must be positive")
    # per-node quadrant elements, node (j, i) at ((i+1)h, (j+1)h)
    a_se = a[0:n, 1:n + 1]
    a_ne = a[1:n + 1, 1:n + 1]
    a_sw = a[0:n, 0:n]
    a_nw = a[1:n + 1, 0:n]
    coeffs = np.zeros((n, n, 3, 3))
    coeffs[:, :, 1, 1] = (2.0 / 3.0) * (a_se + a_ne + a_sw + a_nw)
    coeffs[:, :, 0, 2] = -a_se / 3.0   # (dy=-1, dx=+1)
    coeffs[:, :, 2, 2] = -a_ne / 3.0
    coeffs[:, :, 0, 0] = -a_sw / 3.0
    coeffs[:, :, 2, 0] = -a_nw / 3.0
    coeffs[:, :, 1, 0] = -(a_sw + a_nw) / 6.0   # west
    coeffs[:, :, 1, 2] = -(a_se + a_ne) / 6.0   # east
    coeffs[:, :, 0, 1] = -(a_se + a_sw) / 6.0   # south
    coeffs[:, :, 2, 1] = -(a_ne + a_nw) / 6.0   # north
    return StencilField(grid, coeffs)


_SX = np.array([
    [-1 / 6, 1 / 3, -1 / 6],
    [-2 / 3, 4 / 3, -2 / 3],
    [-1 / 6, 1 / 3, -1 / 6],
])
_SXY = np.array([
    [-1 / 4, 0.0, 1 / 4],
    [0.0, 0.0, 0.0],
    [1 / 4, 0.0, -1 / 4],
])
_SY = _SX.T


def anisotropy_matrix(xi: float, theta: float) -> np.ndarray:
    """Rotation-diagonal-rotation diffusion tensor [[c1, c2], [c3, c4]]."""
    ct, st = np.cos(theta), np.sin(theta)
    c1 = ct * ct + xi * st * st
    c4 = st * st + xi * ct * ct
    c2 = c3 = (1.0 - xi) * st * ct
    return np.array([[c1, c2], [c3, c4]])


def assemble_anisotropic(xi: float, theta: float, grid: Grid2D) -> StencilField:
    """Bilinear-FEM stencil of -div(C grad u), C the rotated diag(1, xi) tensor.

    theta may be any real angle; the tensor is pi-periodic in it.
    """
    if xi <= 0:
        raise DomainError(f"anisotropy strength must be positive, got xi={xi}")
    c = anisotropy_matrix(xi, theta)
    block = c[0, 0] * _SX + (c[0, 1] + c[1, 0]) * _SXY + c[1, 1] * _SY
    return constant_stencil(grid, block)


def sdfem_delta(eps: float, wx: float, wy: float, h: float) -> float:
    """Streamline-diffusion stabilization: (h/2|w|)(1 - 1/P) for P = |w| h/(2 eps) > 1."""
    wn = float(np.hypot(wx, wy))
    if wn == 0.0:
        return 0.0
    peclet = wn * h / (2.0 * eps)
    if peclet <= 1.0:
        return 0.0
    return (h / (2.0 * wn)) * (1.0 - 1.0 / peclet)


def assemble_convection_diffusion(eps: float, wx: float, wy: float, grid: Grid2D) -> StencilField:
    """SDFEM stencil of -eps Lap u + w . grad u with constant wind.

    Block scales under the h^2-RHS convention: diffusion block times eps/3,
    wind block times h/12, stabilization block times delta.  The h/12 factor
    is pinned by a direct bilinear element-assembly oracle in the test suite.
    """
    if eps <= 0:
        raise DomainError(f"viscosity must be positive, got eps={eps}")
    h = grid.h
    delta = sdfem_delta(eps, wx, wy, h)
    diff = np.full((3, 3), -1.0)
    diff[1, 1] = 8.0
    wind = np.array([
        [-wx + wy, 4 * wy, wx + wy],
        [-4 * wx, 0.0, 4 * wx],
        [-(wx + wy), -4 * wy, wx - wy],
    ])
    qx, qy = wx * wx, wy * wy
    s = qx + qy
    stab = np.array([
        [-s / 6 + wx * wy / 2, qx / 3 - 2 * qy / 3, -s / 6 - wx * wy / 2],
        [-2 * qx / 3 + qy / 3, 4 * s / 3, -2 * qx / 3 + qy / 3],
        [-s / 6 - wx * wy / 2, qx / 3 - 2 * qy / 3, -s / 6 + wx * wy / 2],
    ])
    block = (eps / 3.0) * diff + (h / 12.0) * wind + delta * stab
    return constant_stencil(grid, block)


def assemble_jumping(a: np.ndarray, grid: Grid2D) -> StencilField:
    """Cell-centered FV 5-point stencil with harmonic-average transmissibilities.

    ``a`` holds one value per node of the full lattice including the wall
    ring, shape (n+2, n+2), a[p, q] at (x, y) = (q h, p h).
    """
    a = np.asarray(a, dtype=float)
    n = grid.n
    if a.shape != (n + 2, n + 2):
        raise GridMismatch(f"node coefficients must be {(n + 2, n + 2)}, got {a.shape}")
    if np.any(a <= 0):
        raise NonPositiveCoefficient("diffusion coefficient must be positive")

    def harm(u, v):
        return 2.0 * u * v / (u + v)

    ac = a[1:n + 1, 1:n + 1]
    s_w = -harm(a[1:n + 1, 0:n], ac)
    s_e = -harm(a[1:n + 1, 2:n + 2], ac)
    s_s = -harm(a[0:n, 1:n + 1], ac)
    s_n = -harm(a[2:n + 2, 1:n + 1], ac)
    coeffs = np.zeros((n, n, 3, 3))
    coeffs[:, :, 1, 0] = s_w
    coeffs[:, :, 1, 2] = s_e
    coeffs[:, :, 0, 1] = s_s
    coeffs[:, :, 2, 1] = s_n
    coeffs[:, :, 1, 1] = -(s_n + s_s + s_e + s_w)
    return StencilField(grid, coeffs)


# ---------------------------------------------------------------------------
# coefficient samplers


@dataclass(frozen=True)
class RegionMask:
    """Per-node labels in {1, 2}: 1 where a = 1, 2 where a = 10^-m."""

    grid: Grid2D
    labels: np.ndarray

    def __post_init__(self):
        check_field(self.grid, self.labels)

    def indicator(self, label: int) -> np.ndarray:
        return (self.labels == label).astype(float)


def _rng(seed: int, stream: int) -> np.random.Generator:
    # counter-based Philox keyed by (seed, stream): parallel-safe determinism
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def grf_from_modes(zeta: np.ndarray, grid: Grid2D) -> np.ndarray:
    """exp of the truncated KL field at element centers, given the mode draws.

    g = sum_{j,k} (pi^2 (j^2 + k^2) + 9)^-1 zeta_{jk} 2 sin(j pi x) sin(k pi y),
    the Karhunen-Loeve expansion of N(0, (-Lap + 9 I)^-2) in the Dirichlet
    sine basis.
    """
    nmodes = zeta.shape[0]
    j = np.arange(1, nmodes + 1)
    weight = 1.0 / (np.pi**2 * (j[:, None] ** 2 + j[None, :] ** 2) + 9.0)
    centers = (np.arange(grid.n + 1) + 0.5) * grid.h
    sin_tab = np.sin(np.outer(j, np.pi * centers))  # (modes, n+1)
    g = 2.0 * np.einsum("kj,ke,jf->ef", weight * zeta, sin_tab, sin_tab)
    return np.exp(g)


def sample_grf_coefficient(grid: Grid2D, seed: int) -> np.ndarray:
    """Log-Gaussian diffusion coefficient on the (n+1)^2 element grid."""
    nmodes = grid.n + 1
    zeta = _rng(seed, 0x6b71).standard_normal((nmodes, nmodes))
    return grf_from_modes(zeta, grid)


def sample_checkerboard(grid: Grid2D, blocks: int, m: float, seed: int):
    """Checkerboard coefficient in {1, 10^-m} on the node lattice, plus mask.

    Block boundaries snap to the nearest grid line when blocks does not
    divide n+1.  Returns (a, mask) with a of shape (n+2, n+2) including the
    wall ring and the mask labeling interior nodes.
    """
    if blocks < 1:
        raise DomainError(f"blocks must be >= 1, got {blocks}")
    n = grid.n
    rng = _rng(seed, 0xc4e5)
    vals = np.where(rng.random((blocks, blocks)) < 0.5, 1.0, 10.0 ** (-m))
    cuts = np.rint(np.arange(1, blocks) * (n + 1) / blocks).astype(int)
    pos = np.arange(n + 2)  # node positions x = q h, q = 0..n+1
    block_idx = np.searchsorted(cuts, pos, side="right")
    a = vals[np.ix_(block_idx, block_idx)]
    interior = a[1:n + 1, 1:n + 1]
    labels = np.where(interior == 1.0, 1, 2)
    return a, RegionMask(grid, labels)


def make_rhs(kind: str, grid: Grid2D, stencil: StencilField | None = None,
             seed: int | None = None) -> np.ndarray:
    """The four RHS kinds: f1 single-frequency, f2 Gaussian bump, f3 constant,
    f4 = S (standard normal field)."""
    if kind == "f1":
        x, y = grid.nodes()
        return np.sin(np.pi * x) * np.sin(3 * np.pi * y)
    if kind == "f2":
        x, y = grid.nodes()
        return np.exp(-200.0 * ((x - 0.6) ** 2 + (y - 0.55) ** 2))
    if kind == "f3":
        return np.ones(grid.shape)
    if kind == "f4":
        if stencil is None:
            raise DomainError("f4 requires the stencil (f4 = S u, u ~ N(0, 1))")
        if seed is None:
            raise DomainError("f4 requires a seed")
        u = _rng(seed, 0xf4).standard_normal(grid.shape)
        return apply_stencil(stencil, u)
    raise DomainError(f"unknown RHS kind {kind!r}")


def normal_rhs(grid, seed: int) -> np.ndarray:
    """Standard-normal system RHS used by the training data tuples."""
    return _rng(seed, 0x0f17).standard_normal(grid.shape)
