"""The four PDE families plus the 1D Poisson baseline: parameter sampling
recipes, item assembly, and per-family solver defaults."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrector import reciprocal_symbol_scale
from .errors import DomainError
from .grids import Grid1D, Grid2D
from .relax import SmootherSpec
from .stencils import (
    assemble_anisotropic,
    assemble_convection_diffusion,
    assemble_jumping,
    assemble_random_diffusion,
    make_rhs,
    normal_rhs,
    poisson1d_stencil,
    sample_checkerboard,
    sample_grf_coefficient,
)
from .training import ProblemItem, smoother_symbol_input


@dataclass(frozen=True)
class Family:
    """Defaults tying one PDE family to its smoother and corrector setup."""

    name: str
    smoother: SmootherSpec
    partition_mode: str
    partition_param: float
    meta_input: str              # "coefficient" or "symbol"
    variant: str                 # default corrector variant
    ndim: int = 2


_FAMILIES = {
    "random_diffusion": Family("random_diffusion", SmootherSpec("jacobi", 0.75, 10),
                               "box", 0.5, "coefficient", "conv"),
    "anisotropic": Family("anisotropic", SmootherSpec("jacobi", 0.5, 10),
                          "threshold", 0.5, "symbol", "conv"),
    "convection_diffusion": Family("convection_diffusion", SmootherSpec("jacobi", 0.5, 10),
                                   "threshold", 0.5, "symbol", "conv"),
    "jumping": Family("jumping", SmootherSpec("jacobi", 2.0 / 3.0, 10),
                      "box", 0.5, "coefficient", "region_split"),
    "poisson1d": Family("poisson1d", SmootherSpec("jacobi", 2.0 / 3.0, 3),
                        "box", 0.5, "coefficient", "diagonal", ndim=1),
}


def family(name: str) -> Family:
    try:
        return _FAMILIES[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; choose from {sorted(_FAMILIES)}") from None


def make_grid(name: str, n: int):
    return Grid1D(n) if family(name).ndim == 1 else Grid2D(n)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def sample_params(name: str, seed: int, index: int) -> dict:
    """Draw one parameter tuple mu_i; deterministic in (seed, index)."""
    rng = _rng(seed, index)
    if name == "random_diffusion":
        return {"coeff_seed": int(rng.integers(2**31))}
    if name == "anisotropic":
        return {"xi": float(rng.uniform(1e-6, 1.0)),
                "theta": float(rng.uniform(-np.pi, np.pi))}
    if name == "convection_diffusion":
        return {"eps": float(10.0 ** (-rng.uniform(0.0, 8.0))),
                "wx": float(rng.uniform(-1.0, 1.0)),
                "wy": float(rng.uniform(-1.0, 1.0))}
    if name == "jumping":
        return {"coeff_seed": int(rng.integers(2**31)),
                "m": float(rng.uniform(4.0, 8.0)),
                "blocks": 4}
    if name == "poisson1d":
        return {}
    raise DomainError(f"unknown family {name!r}")


def build_item(name: str, params: dict, grid, rhs_seed: int) -> ProblemItem:
    """Assemble the stencil, draw f ~ N(0, I), and attach the meta input."""
    fam = family(name)
    mask = None
    if name == "random_diffusion":
        a = sample_grf_coefficient(grid, params["coeff_seed"])
        stencil = assemble_random_diffusion(a, grid)
        coeff = a
    elif name == "anisotropic":
        stencil = assemble_anisotropic(params["xi"], params["theta"], grid)
        coeff = None
    elif name == "convection_diffusion":
        stencil = assemble_convection_diffusion(params["eps"], params["wx"], params["wy"], grid)
        coeff = None
    elif name == "jumping":
        a, mask = sample_checkerboard(grid, int(params.get("blocks", 4)), params["m"],
                                      params["coeff_seed"])
        stencil = assemble_jumping(a, grid)
        coeff = a[1:-1, 1:-1]
    elif name == "poisson1d":
        stencil = poisson1d_stencil(grid)
        coeff = np.ones(grid.shape)
    else:
        raise DomainError(f"unknown family {name!r}")

    item = ProblemItem(stencil=stencil, f=normal_rhs(grid, rhs_seed),
                       meta_input=coeff, mask=mask, params=dict(params))
    if fam.meta_input == "symbol":
        item = ProblemItem(stencil=stencil, f=item.f,
                           meta_input=smoother_symbol_input(item, fam.smoother),
                           mask=mask, params=dict(params))
    return item


def system_rhs(kind: str, grid, stencil, seed: int = 0) -> np.ndarray:
    """System right-hand side for the solve experiments.

    f1..f3 are sampled PDE sources, so they enter the h^2-scaled system;
    f4 = S u is already a system vector, as is the raw "normal" draw.
    """
    if kind == "normal":
        return normal_rhs(grid, seed)
    f = make_rhs(kind, grid, stencil=stencil, seed=seed)
    if kind in ("f1", "f2", "f3"):
        return grid.h**2 * f
    return f


def region_scales(stencil, mask):
    """Per-region reciprocal-symbol scales for the split corrector."""
    return (reciprocal_symbol_scale(stencil, mask.labels == 1),
            reciprocal_symbol_scale(stencil, mask.labels == 2))
