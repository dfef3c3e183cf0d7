"""Experiment configuration: a sectioned key=value text format (INI).

Every value is typed and validated against the module preconditions before a
run starts.  Annotated examples for each experiment live under configs/.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import DomainError
from .families import family
from .relax import SmootherSpec
from .training import TrainConfig


@dataclass
class ExperimentConfig:
    pde: str
    n: int
    seed: int = 0
    count: int = 32                      # dataset size
    smoother: SmootherSpec = field(default_factory=SmootherSpec)
    mode: str = "direct"                 # direct | meta
    variant: str = "conv"                # diagonal | conv | region_split
    depth: int = 1
    ksize: int = 5
    channels: int = 8
    partition_mode: str = "box"
    partition_param: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "out"

    def validate(self) -> "ExperimentConfig":
        fam = family(self.pde)  # raises for unknown families
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if (self.n + 1) & self.n != 0:
            raise DomainError(f"n must be 2**k - 1 for the radix-2 transforms, got {self.n}")
        if self.mode not in ("direct", "meta"):
            raise DomainError(f"mode must be direct or meta, got {self.mode!r}")
        if self.variant not in ("diagonal", "conv", "region_split"):
            raise DomainError(f"unknown corrector variant {self.variant!r}")
        if self.variant == "region_split" and fam.name != "jumping":
            raise DomainError("region_split is only wired for the jumping family")
        if self.partition_mode not in ("box", "threshold"):
            raise DomainError(f"unknown partition mode {self.partition_mode!r}")
        if self.count < 0:
            raise DomainError("count must be >= 0")
        return self


def _get(cp, section, key, cast, default):
    if not cp.has_section(section) or key not in cp[section]:
        return default
    raw = cp[section][key]
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise DomainError(f"[{section}] {key} = {raw!r}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise DomainError(f"config file {path} not found or unreadable")
    if not cp.has_section("experiment") or "pde" not in cp["experiment"]:
        raise DomainError("config needs [experiment] pde = <family>")
    pde = cp["experiment"]["pde"].strip()
    fam = family(pde)
    smoother = SmootherSpec(
        kind=_get(cp, "smoother", "kind", str, fam.smoother.kind).strip(),
        omega=_get(cp, "smoother", "omega", float, fam.smoother.omega),
        sweeps=_get(cp, "smoother", "sweeps", int, fam.smoother.sweeps),
    )
    train = TrainConfig(
        k_outer=_get(cp, "train", "k_outer", int, 1),
        sweeps=_get(cp, "train", "sweeps", int, smoother.sweeps),
        batch=_get(cp, "train", "batch", int, 8),
        epochs=_get(cp, "train", "epochs", int, 100),
        lr=_get(cp, "train", "lr", float, 1e-4),
        lr_halving_period=_get(cp, "train", "lr_halving_period", int, 100),
        k_increase_period=_get(cp, "train", "k_increase_period", int, 100),
        seed=_get(cp, "experiment", "seed", int, 0),
    )
    cfg = ExperimentConfig(
        pde=pde,
        n=_get(cp, "experiment", "n", int, 31),
        seed=_get(cp, "experiment", "seed", int, 0),
        count=_get(cp, "experiment", "count", int, 32),
        smoother=smoother,
        mode=_get(cp, "corrector", "mode", str, "direct").strip(),
        variant=_get(cp, "corrector", "variant", str, fam.variant).strip(),
        depth=_get(cp, "corrector", "depth", int, 1),
        ksize=_get(cp, "corrector", "ksize", int, 5),
        channels=_get(cp, "corrector", "channels", int, 8),
        partition_mode=_get(cp, "partition", "mode", str, fam.partition_mode).strip(),
        partition_param=_get(cp, "partition", "param", float, fam.partition_param),
        train=train,
        out_dir=_get(cp, "output", "dir", str, "out").strip(),
    )
    return cfg.validate()
