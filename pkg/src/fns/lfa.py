"""Local Fourier analysis: operator/smoother symbols and the B/H frequency split.

Symbols are evaluated on the extended n' x n' frequency lattice of the grid
(theta = 2 pi m / n' wrapped to [-pi, pi)), so that lattice bin j sits at the
sine eigenfrequency pi j h.  Variable-coefficient problems are analyzed by
worst-case frozen-coefficient sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPartition, ZeroDiagonal
from .grids import freq_lattice, freq_values
from .relax import SmootherSpec
from .stencils import StencilField


@dataclass(frozen=True)
class SymbolMap:
    """Complex symbol values on the extended frequency lattice."""

    grid: object
    values: np.ndarray

    def thetas(self) -> tuple:
        return freq_lattice(self.grid)

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class FrequencyMask:
    """Per-frequency labels: True = corrector-assigned (H), False = smoother (B).

    mu_B is the worst smoother-symbol modulus over the B side; eps_B the
    excess of the worst H-side modulus over 1 (clamped at 0).
    """

    grid: object
    h_labels: np.ndarray
    mu_B: float
    eps_B: float


def symbol_from_block(block: np.ndarray, grid) -> np.ndarray:
    """sum_k c_k e^{i theta . k} for one (dy, dx)-indexed coefficient block."""
    if grid.ndim == 1:
        th = freq_values(grid.extended_n)
        vals = np.zeros(th.shape, dtype=complex)
        for b in range(3):
            vals += block[b] * np.exp(1j * th * (b - 1))
        return vals
    t1, t2 = freq_lattice(grid)
    vals = np.zeros(t1.shape, dtype=complex)
    for a in range(3):
        for b in range(3):
            vals += block[a, b] * np.exp(1j * (t1 * (b - 1) + t2 * (a - 1)))
    return vals


def stencil_symbol(stencil: StencilField, grid=None) -> SymbolMap:
    """Formal eigenvalue of a constant stencil at every lattice frequency."""
    grid = grid or stencil.grid
    block = stencil.constant_coeffs()
    return SymbolMap(grid, symbol_from_block(block, grid))


def _jacobi_block_symbol(block: np.ndarray, spec: SmootherSpec, grid) -> np.ndarray:
    vals = symbol_from_block(block, grid)
    if spec.kind == "jacobi":
        c0 = block[(1,) * grid.ndim]
        if abs(c0) == 0:
            raise ZeroDiagonal("stencil center entry is zero")
        base = 1.0 - spec.omega * vals / c0
    else:
        base = 1.0 - spec.omega * vals
    return base**spec.sweeps


def jacobi_symbol(spec: SmootherSpec, stencil: StencilField, grid=None) -> SymbolMap:
    """Error-propagator symbol (1 - omega A~(theta)/c0)^sweeps of the damped
    Jacobi method (Richardson drops the c0 normalization)."""
    grid = grid or stencil.grid
    block = stencil.constant_coeffs()
    return SymbolMap(grid, _jacobi_block_symbol(block, spec, grid))


def sampled_symbol(spec: SmootherSpec, stencil: StencilField, sample_stride: int = 4) -> SymbolMap:
    """Worst-case frozen-coefficient smoother symbol for varying coefficients.

    Freezes the local coefficient block at a strided subset of nodes, takes
    the pointwise-largest modulus over the samples, and keeps the complex
    value attaining it.  For constant stencils this reduces to
    :func:`jacobi_symbol`.
    """
    grid = stencil.grid
    if stencil.is_constant():
        return jacobi_symbol(spec, stencil, grid)
    stride = max(1, int(sample_stride))
    best = None
    if grid.ndim == 1:
        samples = [stencil.coeffs[i] for i in range(0, grid.n, stride)]
    else:
        samples = [stencil.coeffs[j, i]
                   for j in range(0, grid.n, stride)
                   for i in range(0, grid.n, stride)]
    for block in samples:
        vals = _jacobi_block_symbol(block, spec, grid)
        if best is None:
            best = vals
        else:
            best = np.where(np.abs(vals) > np.abs(best), vals, best)
    return SymbolMap(grid, best)


def box_h_region(grid) -> np.ndarray:
    """Label lattice frequencies inside [-pi/2, pi/2)^d as corrector-assigned."""
    if grid.ndim == 1:
        th = freq_values(grid.extended_n)
        return (th >= -np.pi / 2) & (th < np.pi / 2)
    t1, t2 = freq_lattice(grid)
    return (t1 >= -np.pi / 2) & (t1 < np.pi / 2) & (t2 >= -np.pi / 2) & (t2 < np.pi / 2)


def partition_frequencies(symbol: SymbolMap, mode: str = "box", param: float = 0.5) -> FrequencyMask:
    """Split the lattice into smoother-handled (B) and corrector-handled (H) sets.

    box mode: H = [-pi/2, pi/2)^d.  threshold mode: H wherever the smoother
    symbol modulus exceeds `param`.  Raises EmptyPartition if either side is
    empty (the smoothing-factor summary would be meaningless).
    """
    mod = symbol.modulus
    if mode == "box":
        h = box_h_region(symbol.grid)
    elif mode == "threshold":
        h = mod > param
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    if not h.any() or h.all():
        side = "H" if not h.any() else "B"
        raise EmptyPartition(f"partition left the {side} side empty")
    mu_b = float(mod[~h].max())
    eps_b = max(0.0, float(mod[h].max()) - 1.0)
    return FrequencyMask(symbol.grid, h, mu_b, eps_b)


def h_region_connected(mask: FrequencyMask) -> bool:
    """Connectivity of the H set on the lattice graph (4-neighborhood, periodic).

    The frequency lattice is a torus, so adjacency wraps at the +-pi edges.
    """
    h = mask.h_labels
    if h.ndim == 1:
        h = h[None, :]
    n0, n1 = h.shape
    seen = np.zeros_like(h, dtype=bool)
    start = np.argwhere(h)
    if start.size == 0:
        return True
    stack = [tuple(start[0])]
    seen[tuple(start[0])] = True
    while stack:
        j, i = stack.pop()
        for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = ((j + dj) % n0, (i + di) % n1)
            if h[q] and not seen[q]:
                seen[q] = True
                stack.append(q)
    return bool(seen[h].all())
