"""Stationary smoothing iterations (damped Jacobi, Richardson)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ZeroDiagonal
from .grids import check_field
from .stencils import StencilField, apply_stencil, apply_stencil_adjoint

_DIAG_TINY = 1e-300


@dataclass(frozen=True)
class SmootherSpec:
    """kind in {jacobi, richardson}; omega in (0, 2); sweeps >= 0 (0 = skip)."""

    kind: str = "jacobi"
    omega: float = 2.0 / 3.0
    sweeps: int = 1

    def __post_init__(self):
        if self.kind not in ("jacobi", "richardson"):
            raise DomainError(f"unknown smoother kind {self.kind!r}")
        if not 0.0 < self.omega < 2.0:
            raise DomainError(f"omega must lie in (0, 2), got {self.omega}")
        if self.sweeps < 0:
            raise DomainError(f"sweeps must be >= 0, got {self.sweeps}")


def _jacobi_diag(stencil: StencilField) -> np.ndarray:
    d = stencil.center
    if np.any(np.abs(d) < _DIAG_TINY):
        raise ZeroDiagonal("stencil center entry is zero")
    return d


def smooth(spec: SmootherSpec, stencil: StencilField, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Apply the smoother `spec.sweeps` times: u <- u + omega D^-1 (f - S u).

    Richardson drops the diagonal scaling.  Each sweep reads the old iterate
    and writes a fresh field.
    """
    u = check_field(stencil.grid, u)
    f = check_field(stencil.grid, f)
    d = _jacobi_diag(stencil) if spec.kind == "jacobi" else None
    for _ in range(spec.sweeps):
        r = f - apply_stencil(stencil, u)
        if d is not None:
            u = u + spec.omega * (r / d)
        else:
            u = u + spec.omega * r
    return u


def error_propagation_apply(spec: SmootherSpec, stencil: StencilField, e: np.ndarray) -> np.ndarray:
    """(I - omega D^-1 S)^sweeps e (Jacobi) or (I - omega S)^sweeps e (Richardson)."""
    e = check_field(stencil.grid, e)
    d = _jacobi_diag(stencil) if spec.kind == "jacobi" else None
    for _ in range(spec.sweeps):
        se = apply_stencil(stencil, e)
        e = e - spec.omega * (se / d if d is not None else se)
    return e


def error_propagation_adjoint(spec: SmootherSpec, stencil: StencilField, v: np.ndarray) -> np.ndarray:
    """Conjugate transpose of one full error-propagation application."""
    v = check_field(stencil.grid, v)
    d = _jacobi_diag(stencil) if spec.kind == "jacobi" else None
    for _ in range(spec.sweeps):
        w = v / np.conj(d) if d is not None else v
        v = v - spec.omega * apply_stencil_adjoint(stencil, w)
    return v
