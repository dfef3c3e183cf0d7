"""The spectral corrector: diagonal, conv-transition, and region-split variants.

Applied to a residual r the corrector computes

    H r = restrict( F  C  Lambda  C*  F^-1  extend(r) )

on the odd-extended periodic lattice, where Lambda is a learned complex
diagonal over frequencies and C a composition of small complex convolutions
acting on the frequency lattice with periodic wrap (C* is its conjugate
transpose: correlation with conjugated kernels in reverse order).  The
diagonal variant has no kernels.  The region-split variant recombines two
sub-correctors through spatial masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, IndexOutOfRange
from .grids import check_field, fft2, odd_extend, odd_extend_adjoint, restrict, sine_mode
from .lfa import symbol_from_block
from .stencils import RegionMask, StencilField, mean_coeff_block


def identity_kernel(size: int = 5) -> np.ndarray:
    k = np.zeros((size, size), dtype=complex)
    k[size // 2, size // 2] = 1.0
    return k


def conv_periodic(kernel: np.ndarray, z: np.ndarray) -> np.ndarray:
    """(k * z)(x) = sum_d k[d] z(x - d) with periodic wrap; zero taps skipped."""
    r0 = kernel.shape[0] // 2
    r1 = kernel.shape[1] // 2
    out = None
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            w = kernel[a, b]
            if w == 0:
                continue
            term = w * np.roll(z, (a - r0, b - r1), axis=(0, 1))
            out = term if out is None else out + term
    if out is None:
        return np.zeros_like(z)
    return out


def corr_conj_periodic(kernel: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Adjoint of conv_periodic: sum_d conj(k[d]) z(x + d)."""
    r0 = kernel.shape[0] // 2
    r1 = kernel.shape[1] // 2
    out = None
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            w = np.conj(kernel[a, b])
            if w == 0:
                continue
            term = w * np.roll(z, (r0 - a, r1 - b), axis=(0, 1))
            out = term if out is None else out + term
    if out is None:
        return np.zeros_like(z)
    return out


def apply_c(kernels, z: np.ndarray) -> np.ndarray:
    """C = conv(k_L) o ... o conv(k_1), kernels applied in listed order."""
    for k in kernels:
        z = conv_periodic(k, z)
    return z


def apply_c_star(kernels, z: np.ndarray) -> np.ndarray:
    """C* : correlation with conjugated kernels, reverse order."""
    for k in reversed(kernels):
        z = corr_conj_periodic(k, z)
    return z


@dataclass(frozen=True)
class CorrectorActivation:
    """Frequency-domain intermediates of one application (all n'^d shaped)."""

    post_f_inv: np.ndarray
    post_c_star: np.ndarray
    post_lambda: np.ndarray
    post_c: np.ndarray


@dataclass(frozen=True)
class SpectralCorrector:
    """variant in {diagonal, conv, region_split}.

    diagonal/conv: lambda_tilde holds the complex diagonal on the extended
    lattice, kernels the (possibly empty) tuple of complex conv kernels.
    region_split: `parts` holds two sub-correctors and `mask` the node labels.
    """

    grid: object
    variant: str = "diagonal"
    lambda_tilde: np.ndarray | None = None
    kernels: tuple = ()
    parts: tuple | None = None
    mask: RegionMask | None = None

    def __post_init__(self):
        if self.variant == "region_split":
            if self.parts is None or self.mask is None:
                raise ValueError("region_split needs two sub-correctors and a mask")
            return
        ext_shape = (self.grid.extended_n,) * self.grid.ndim
        if self.lambda_tilde is None or self.lambda_tilde.shape != ext_shape:
            raise GridMismatch(f"lambda_tilde must have shape {ext_shape}")
        if self.variant == "diagonal" and self.kernels:
            raise ValueError("diagonal variant carries no kernels")
        if self.variant not in ("diagonal", "conv"):
            raise ValueError(f"unknown variant {self.variant!r}")


def _apply_flat(hc: SpectralCorrector, r: np.ndarray, capture: bool):
    one_d = hc.grid.ndim == 1
    z0 = fft2(odd_extend(np.asarray(r, dtype=complex)), inverse=True)
    if one_d:
        z0 = z0[None, :]  # conv/roll helpers are written for 2 axes
    z1 = apply_c_star(hc.kernels, z0)
    lam = hc.lambda_tilde[None, :] if one_d else hc.lambda_tilde
    z2 = lam * z1
    z3 = apply_c(hc.kernels, z2)
    out = restrict(fft2(z3[0] if one_d else z3))
    act = CorrectorActivation(z0, z1, z2, z3) if capture else None
    return out, act


def apply_corrector(hc: SpectralCorrector, r: np.ndarray, capture: bool = False):
    """H r (complex).  With capture=True also returns the CorrectorActivation
    (region_split returns the first sub-corrector's activations)."""
    r = check_field(hc.grid, r)
    if hc.variant == "region_split":
        h1, act = _apply_flat(hc.parts[0], r, capture)
        h2, _ = _apply_flat(hc.parts[1], r, False)
        out = hc.mask.indicator(1) * h1 + hc.mask.indicator(2) * h2
        return (out, act) if capture else out
    out, act = _apply_flat(hc, r, capture)
    return (out, act) if capture else out


def adjoint_apply(hc: SpectralCorrector, g: np.ndarray) -> np.ndarray:
    """Conjugate transpose of apply_corrector: <H r, g> = <r, adjoint_apply(g)>."""
    g = check_field(hc.grid, g)
    if hc.variant == "region_split":
        out = adjoint_apply(hc.parts[0], hc.mask.indicator(1) * g)
        out = out + adjoint_apply(hc.parts[1], hc.mask.indicator(2) * g)
        return out
    ne = hc.grid.extended_n
    emb = np.zeros((ne,) * hc.grid.ndim, dtype=complex)
    emb[(slice(1, ne // 2),) * hc.grid.ndim] = g  # adjoint of restrict
    z = fft2(emb, inverse=True)  # adjoint of unitary F
    if hc.grid.ndim == 1:
        z = z[None, :]
    z = apply_c_star(hc.kernels, z)  # adjoint of C
    lam = hc.lambda_tilde[None, :] if hc.grid.ndim == 1 else hc.lambda_tilde
    z = np.conj(lam) * z
    z = apply_c(hc.kernels, z)  # adjoint of C*
    spec = z[0] if hc.grid.ndim == 1 else z
    v = fft2(spec)  # adjoint of F^-1
    return odd_extend_adjoint(v)


def sine_bin_impulse(grid, index) -> np.ndarray:
    """Extended-lattice spectrum of the odd-symmetrized unit impulse at a bin.

    The corrector only ever sees odd-symmetric inputs, whose natural unit
    basis vector for frequency bin (j, k) is the conjugate quartet carried by
    the sampled sine mode; with C = I the resulting column of F C is the
    product sine mode itself.
    """
    idx = np.atleast_1d(np.asarray(index, dtype=int))
    if idx.shape != (grid.ndim,):
        raise IndexOutOfRange(f"index must have {grid.ndim} components")
    if np.any(idx < 0) or np.any(idx >= grid.extended_n):
        raise IndexOutOfRange(f"bin {tuple(idx)} outside extended lattice")
    idx = np.minimum(idx % grid.extended_n, (-idx) % grid.extended_n)
    mode = sine_mode(grid, idx if grid.ndim == 2 else int(idx[0]))
    return fft2(odd_extend(mode), inverse=True)


def corrector_columns(hc: SpectralCorrector, indices) -> list:
    """Columns psi_i = restrict(F C (unit sine-bin impulse)), the learned
    eigenvector candidates."""
    if hc.variant == "region_split":
        raise ValueError("columns are defined per sub-corrector; pass hc.parts[i]")
    cols = []
    for index in indices:
        z = sine_bin_impulse(hc.grid, index)
        if hc.grid.ndim == 1:
            z = z[None, :]
        z = apply_c(hc.kernels, z)
        spec = z[0] if hc.grid.ndim == 1 else z
        cols.append(restrict(fft2(spec)))
    return cols


def reciprocal_symbol_scale(stencil: StencilField, node_mask: np.ndarray | None = None,
                            rel_floor: float = 1e-8) -> np.ndarray:
    """Tikhonov-guarded reciprocal of the (masked-)mean-stencil symbol.

    Used as the fixed per-problem scale of the Lambda parameterization: a
    trainable weight of order one times this scale reproduces the fast-solver
    diagonal 1/symbol, which keeps gradient steps comparable across
    frequencies and grid sizes.
    """
    block = mean_coeff_block(stencil, node_mask)
    sym = symbol_from_block(block, stencil.grid)
    amax = np.abs(sym).max()
    delta = rel_floor * (amax if amax > 0 else 1.0)
    return np.conj(sym) / (np.abs(sym) ** 2 + delta**2)


def interpolate_lambda(lam: np.ndarray, target_extended_n: int) -> np.ndarray:
    """Bilinear transfer of a lambda diagonal between extended lattices.

    Interpolates on the normalized periodic frequency coordinate, wrap-aware,
    so a corrector trained at one scale can be reused at another.
    """
    src = lam.shape[0]
    if src == target_extended_n:
        return lam.copy()
    pos = np.arange(target_extended_n) * (src / target_extended_n)
    i0 = np.floor(pos).astype(int) % src
    i1 = (i0 + 1) % src
    w = pos - np.floor(pos)
    if lam.ndim == 1:
        return (1 - w) * lam[i0] + w * lam[i1]
    a = (1 - w)[:, None] * lam[np.ix_(i0, i0)] + w[:, None] * lam[np.ix_(i1, i0)]
    b = (1 - w)[:, None] * lam[np.ix_(i0, i1)] + w[:, None] * lam[np.ix_(i1, i1)]
    return (1 - w)[None, :] * a + w[None, :] * b
