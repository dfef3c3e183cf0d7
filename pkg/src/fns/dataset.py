"""Dataset persistence: per-item parameter tuples plus RHS seeds in CSV.

Realized fields are regenerated from seeds at load; --materialize dumps them
to an .npz for debugging.
"""

from __future__ import annotations

import numpy as np

from . import families
from .config import ExperimentConfig
from .errors import DomainError
from .util import read_csv, write_csv

_COLUMNS = {
    "random_diffusion": ["index", "coeff_seed", "rhs_seed"],
    "anisotropic": ["index", "xi", "theta", "rhs_seed"],
    "convection_diffusion": ["index", "eps", "wx", "wy", "rhs_seed"],
    "jumping": ["index", "coeff_seed", "m", "blocks", "rhs_seed"],
    "poisson1d": ["index", "rhs_seed"],
}

_INT_FIELDS = {"index", "coeff_seed", "rhs_seed", "blocks"}


def dataset_generate(cfg: ExperimentConfig, path, materialize: bool = False) -> int:
    """Write cfg.count item records; returns the number of rows written."""
    cols = _COLUMNS[cfg.pde]
    rows = []
    for i in range(cfg.count):
        params = families.sample_params(cfg.pde, cfg.seed, i)
        rhs_seed = int(np.random.Generator(np.random.Philox(key=[cfg.seed, 2**32 + i]))
                       .integers(2**31))
        record = {"index": i, "rhs_seed": rhs_seed, **params}
        rows.append([record[c] for c in cols])
    write_csv(path, cols, rows)
    if materialize:
        _materialize(cfg, path)
    return len(rows)


def _materialize(cfg: ExperimentConfig, path) -> None:
    items = dataset_load(cfg, path)
    arrays = {}
    for i, item in enumerate(items):
        arrays[f"f_{i}"] = item.f
        arrays[f"stencil_{i}"] = item.stencil.coeffs
        if item.meta_input is not None:
            arrays[f"coeff_{i}"] = item.meta_input
    np.savez(str(path) + ".npz", **arrays)


def dataset_load(cfg: ExperimentConfig, path):
    """Rebuild ProblemItems from a dataset CSV."""
    header, raw = read_csv(path)
    want = _COLUMNS[cfg.pde]
    if header != want:
        raise DomainError(f"{path}: header {header} does not match family columns {want}")
    grid = families.make_grid(cfg.pde, cfg.n)
    items = []
    for row in raw:
        rec = dict(zip(header, row))
        params = {}
        for key, val in rec.items():
            if key in ("index", "rhs_seed"):
                continue
            params[key] = int(val) if key in _INT_FIELDS else float(val)
        items.append(families.build_item(cfg.pde, params, grid, int(rec["rhs_seed"])))
    return items
