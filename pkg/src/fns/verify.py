"""Brute-force convergence audit: dense spectra, expansion sparsity, and the
contraction bound eta = sqrt(max{2 mu_B^2M C, 2 (1+eps_B)^2M mu_H}).

Everything here is desk-scale (dense matrices up to ~1000 rows) and leans on
the in-repo eigensolver/LU so the oracle does not certify itself with the
machinery under test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import eigen
from .corrector import SpectralCorrector, apply_corrector, corrector_columns
from .errors import DomainError, SingularEigenbasis
from .hybrid import geometric_contraction, run_fixed_steps
from .lfa import jacobi_symbol, sampled_symbol
from .relax import SmootherSpec
from .stencils import StencilField, stencil_to_dense

_MAX_DENSE = 1024


@dataclass
class EigenSystem:
    """Dense spectrum sorted by |lambda|; eigenvectors are unit columns."""

    grid: object
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray          # ||A xi - lambda xi|| per pair
    condition: float               # kappa_1 of the eigenvector matrix
    operator_norm: float

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def dense_eig(stencil: StencilField, max_sweeps: int | None = None) -> EigenSystem:
    """Full spectrum of the stencil operator via the in-repo shifted-QR solver."""
    a = stencil_to_dense(stencil)
    if a.shape[0] > _MAX_DENSE:
        raise DomainError(f"dense eigendecomposition capped at {_MAX_DENSE} unknowns, got {a.shape[0]}")
    vals, vecs = eigen.eig(a, max_sweeps)
    res = np.linalg.norm(a @ vecs - vecs * vals[None, :], axis=0)
    cond = eigen.condition_1norm(vecs)
    return EigenSystem(stencil.grid, vals, vecs, res, cond, float(np.linalg.norm(a, ord=1)))


def mode_field(grid, theta) -> np.ndarray:
    """Odd-symmetrized lattice mode at theta: the product-sine vector, unit norm.

    On the Dirichlet grid the conjugate quartet of the extended-lattice
    Fourier mode e^{i theta . k} collapses to prod_d sin(theta_d k_d); these
    vectors form the complete orthogonal mode basis the error decomposes
    into, and at sine eigenfrequencies they coincide with the analytic
    eigenvectors.
    """
    k = np.arange(1, grid.n + 1)
    if grid.ndim == 1:
        v = np.sin(theta[0] * k)
    else:
        v = np.outer(np.sin(theta[1] * k), np.sin(theta[0] * k))
    v = v.ravel().astype(complex)
    nv = np.linalg.norm(v)
    if nv < 1e-13 * grid.n:
        raise DomainError(f"dead frequency {tuple(theta)}: mode vanishes on the grid")
    return v / nv


def expansion_coefficients(eig_sys: EigenSystem, theta, tau: float = 1e-6):
    """Coefficients t with Q t = phi(theta) and their significant support V.

    phi is the unit-normalized lattice mode of :func:`mode_field`; V collects
    indices with |t_i| above tau * max|t|.  tau = 0 degenerates to full
    support and is rejected.
    """
    if tau <= 0.0:
        raise DomainError("tau must be positive (tau = 0 keeps every index)")
    if eig_sys.condition > 1e14:
        raise SingularEigenbasis(f"eigenbasis condition {eig_sys.condition:.2e} too large")
    phi = mode_field(eig_sys.grid, np.atleast_1d(theta))
    lu, perm = eigen.lu_factor(eig_sys.eigenvectors)
    t = eigen.lu_solve(lu, perm, phi)
    support = np.nonzero(np.abs(t) > tau * np.abs(t).max())[0]
    return t, support


def corrector_eigen_errors(hc: SpectralCorrector, eig_sys: EigenSystem) -> np.ndarray:
    """||l_i|| = ||xi_i - H(lambda_i xi_i)|| for every eigenpair, matrix-free."""
    shape = eig_sys.grid.shape
    out = np.empty(eig_sys.n)
    for i in range(eig_sys.n):
        xi = eig_sys.eigenvectors[:, i].reshape(shape)
        li = xi - apply_corrector(hc, eig_sys.eigenvalues[i] * xi)
        out[i] = np.linalg.norm(li)
    return out


@dataclass
class AssumptionReport:
    """Estimated constants of the three assumptions plus the theorem bound."""

    mu_B: float
    eps_B: float
    mu_H: float
    C_bound: float
    eps_v: float
    eps_lambda: float
    eta: float
    max_support: int
    eig_condition: float
    empirical_contraction: float
    consistent: bool
    breaches: list = field(default_factory=list)
    support_sums_H: np.ndarray | None = None
    support_sums_B: np.ndarray | None = None

    def lines(self) -> list:
        out = [
            f"mu_B                 = {self.mu_B:.6g}",
            f"eps_B                = {self.eps_B:.6g}",
            f"mu_H                 = {self.mu_H:.6g}",
            f"C_bound              = {self.C_bound:.6g}",
            f"eps_v                = {self.eps_v:.6g}",
            f"eps_lambda           = {self.eps_lambda:.6g}",
            f"eta                  = {self.eta:.6g}",
            f"max |V_theta|        = {self.max_support}",
            f"eigenvector kappa_1  = {self.eig_condition:.6g}",
            f"empirical contraction= {self.empirical_contraction:.6g}",
            f"bound honored        = {self.consistent}",
        ]
        for b in self.breaches:
            out.append(f"breach: {b}")
        return out


def theorem_eta(mu_b: float, eps_b: float, m_sweeps: int, c_bound: float, mu_h: float) -> float:
    """sqrt(max{2 mu_B^2M C, 2 (1+eps_B)^2M mu_H})."""
    side_b = 2.0 * mu_b ** (2 * m_sweeps) * c_bound
    side_h = 2.0 * (1.0 + eps_b) ** (2 * m_sweeps) * mu_h
    return float(np.sqrt(max(side_b, side_h)))


def _canonical_bins(grid):
    if grid.ndim == 1:
        return [(j,) for j in range(1, grid.n + 1)]
    return [(j, k) for k in range(1, grid.n + 1) for j in range(1, grid.n + 1)]


def _bin_theta(grid, index):
    return tuple(np.pi * grid.h * np.asarray(index, dtype=float))


def _quartet_max_modulus(symbol_values: np.ndarray, grid) -> np.ndarray:
    """Worst symbol modulus over each canonical bin's conjugate quartet.

    Returns an array indexed like the canonical bin list of :func:`_canonical_bins`.
    """
    a = np.abs(symbol_values)
    ne = grid.extended_n
    ridx = (-np.arange(ne)) % ne
    if grid.ndim == 1:
        q = np.maximum(a, a[ridx])
        return np.array([q[j] for j in range(1, grid.n + 1)])
    q = np.maximum(a, a[:, ridx])
    q = np.maximum(q, q[ridx, :])
    return np.array([q[k, j] for k in range(1, grid.n + 1) for j in range(1, grid.n + 1)])


def _quartet_mean_lambda(hc: SpectralCorrector, index) -> complex:
    lam = hc.lambda_tilde
    ne = hc.grid.extended_n
    if hc.grid.ndim == 1:
        (j,) = index
        return 0.5 * (lam[j] + lam[(ne - j) % ne])
    j, k = index
    vals = [lam[k % ne, j % ne], lam[k % ne, (ne - j) % ne],
            lam[(ne - k) % ne, j % ne], lam[(ne - k) % ne, (ne - j) % ne]]
    return sum(vals) / 4.0


def audit(stencil: StencilField, smoother: SmootherSpec, hc: SpectralCorrector,
          tau: float = 1e-6, partition_mode: str = "box", partition_param: float = 0.5,
          sample_stride: int = 4, sparsity_budget: int = 8, f: np.ndarray | None = None,
          keep_sums: bool = False) -> AssumptionReport:
    """Estimate the assumption constants, form eta, and test it against a run.

    Conventions: Fourier modes are unit-normalized before expansion; the
    per-frequency sums use the tau-thresholded support V_theta; eps_lambda
    pairs each canonical sine bin with its best-matching eigenvector (greedy
    on |<psi, xi>|, ties to the lower index) and uses the conjugate-quartet
    mean of the lambda diagonal as the bin's effective multiplier.  The
    region-split variant reports NaN for the single-corrector constants
    eps_v/eps_lambda.
    """
    grid = stencil.grid
    symbol = (jacobi_symbol(smoother, stencil) if stencil.is_constant()
              else sampled_symbol(smoother, stencil, sample_stride))
    breaches = []

    # per-bin damping = worst symbol modulus over the bin's conjugate quartet
    bins = _canonical_bins(grid)
    damping = _quartet_max_modulus(symbol.values, grid)
    if partition_mode == "box":
        h_flat = np.array([max(_bin_theta(grid, b)) < np.pi / 2 for b in bins])
    elif partition_mode == "threshold":
        h_flat = damping > partition_param
    else:
        raise DomainError(f"unknown partition mode {partition_mode!r}")
    if not h_flat.any() or h_flat.all():
        raise DomainError("partition left one side empty at the bin level")
    mu_b = float(damping[~h_flat].max())
    eps_b = max(0.0, float(damping[h_flat].max()) - 1.0)
    if mu_b >= 1.0:
        breaches.append(f"mu_B = {mu_b:.4g} >= 1: smoother assumption violated")

    eig_sys = dense_eig(stencil)
    if eig_sys.condition > 1e8:
        breaches.append(f"eigenvector condition {eig_sys.condition:.3e} > 1e8: eta unreliable")

    l_norms = corrector_eigen_errors(hc, eig_sys)

    # batched expansion of every canonical lattice mode in the eigenbasis
    phis = np.stack([mode_field(grid, np.asarray(_bin_theta(grid, b))) for b in bins], axis=1)
    lu, perm = eigen.lu_factor(eig_sys.eigenvectors)
    coeffs = eigen.lu_solve(lu, perm, phis)
    absc = np.abs(coeffs)
    supports = absc > tau * absc.max(axis=0, keepdims=True)
    max_support = int(supports.sum(axis=0).max())
    if max_support > sparsity_budget:
        breaches.append(
            f"max |V_theta| = {max_support} exceeds sparsity budget {sparsity_budget}")

    sums = (supports * (l_norms**2)[:, None]).sum(axis=0)
    mu_h = float(sums[h_flat].max())
    c_bound = float(sums[~h_flat].max())
    i_h = np.zeros(eig_sys.n, dtype=bool)
    for col in np.nonzero(h_flat)[0]:
        i_h[supports[:, col]] = True

    # Assumption-3 constants through the matched sine-bin columns
    if hc.variant == "region_split":
        eps_v = float("nan")
        eps_lambda = float("nan")
    else:
        cols = corrector_columns(hc, bins)
        psi = np.stack([c.ravel() for c in cols], axis=1)
        norms = np.linalg.norm(psi, axis=0)
        norms[norms == 0] = 1.0
        psi = psi / norms
        overlap = np.abs(eig_sys.eigenvectors.conj().T @ psi)  # (eig, bin)
        eps_v = 0.0
        eps_lambda = 0.0
        for b, index in enumerate(bins):
            j = int(np.argmax(overlap[:, b]))
            lam_eff = _quartet_mean_lambda(hc, index)
            prod = lam_eff * eig_sys.eigenvalues[j]
            if i_h[j]:
                eps_v = max(eps_v, 2.0 - 2.0 * float(overlap[j, b]))
                eps_lambda = max(eps_lambda, abs(prod - 1.0))
            else:
                eps_lambda = max(eps_lambda, abs(lam_eff))
        eps_v = float(eps_v)
        eps_lambda = float(eps_lambda)

    eta = theorem_eta(mu_b, eps_b, smoother.sweeps, c_bound, mu_h)

    if f is None:
        rng = np.random.Generator(np.random.Philox(key=[0xa0d17, 0]))
        f = rng.standard_normal(grid.shape)
    report = run_fixed_steps(stencil, f, smoother, hc, steps=20)
    empirical = geometric_contraction(report.residual_history, first=5, last=20)
    consistent = bool(empirical <= eta * (1.0 + 1e-6)) or bool(breaches)

    return AssumptionReport(
        mu_B=mu_b, eps_B=eps_b, mu_H=mu_h, C_bound=c_bound,
        eps_v=eps_v, eps_lambda=eps_lambda, eta=eta, max_support=max_support,
        eig_condition=eig_sys.condition, empirical_contraction=empirical,
        consistent=consistent, breaches=breaches,
        support_sums_H=sums[h_flat] if keep_sums else None,
        support_sums_B=sums[~h_flat] if keep_sums else None,
    )
