"""fns: a structured-grid laboratory for FFT-based hybrid iterative solvers.

Grids and unitary transforms (grids), the four parametric PDE stencil
families (stencils, families), stationary smoothers (relax), local Fourier
analysis (lfa), the trainable spectral corrector (corrector), reverse-mode
training (training), the outer hybrid loop and experiment sweeps (hybrid),
the dense convergence audit (verify, eigen), and the operational shell
(config, dataset, checkpoint, cli).
"""

from .grids import Grid1D, Grid2D, dst_solve_poisson_1d, fft2, odd_extend, restrict
from .relax import SmootherSpec
from .stencils import StencilField, apply_stencil
from .corrector import SpectralCorrector, apply_corrector
from .hybrid import SolveReport, hybrid_solve
from .training import DirectModel, MetaModel, ProblemItem, RegionSplitModel, TrainConfig, train
from .verify import AssumptionReport, audit, dense_eig

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport", "DirectModel", "Grid1D", "Grid2D", "MetaModel",
    "ProblemItem", "RegionSplitModel", "SmootherSpec", "SolveReport",
    "SpectralCorrector", "StencilField", "TrainConfig", "apply_corrector",
    "apply_stencil", "audit", "dense_eig", "dst_solve_poisson_1d", "fft2",
    "hybrid_solve", "odd_extend", "restrict", "train",
]
