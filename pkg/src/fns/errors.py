"""Exception types shared across the package."""


class FnsError(Exception):
    """Base class for all package errors."""


class NonPowerOfTwoSize(FnsError):
    """Transform size is not a power of two (grids must have n = 2**k - 1)."""


class GridMismatch(FnsError):
    """Operands live on different grids."""


class NonPositiveCoefficient(FnsError):
    """Diffusion coefficient must be strictly positive."""


class DomainError(FnsError):
    """Parameter outside its admissible range."""


class NotConstantStencil(FnsError):
    """Operation requires a spatially constant stencil."""


class ZeroDiagonal(FnsError):
    """Stencil center entry is (numerically) zero; Jacobi undefined."""


class EmptyPartition(FnsError):
    """Frequency partition left one side empty."""


class IndexOutOfRange(FnsError):
    """Lattice index outside the extended frequency lattice."""


class ShapeMismatch(FnsError):
    """Array shapes incompatible."""


class ZeroRhs(FnsError):
    """Right-hand side has zero norm; relative residual undefined."""


class DivergedError(FnsError):
    """Iteration diverged (sustained residual growth). Carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MaxIterationsError(FnsError):
    """Iteration budget exhausted before reaching the tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonConvergentQR(FnsError):
    """Dense QR eigensolver exceeded its sweep budget."""


class SingularEigenbasis(FnsError):
    """Eigenvector matrix too ill-conditioned to expand against."""


class CorruptCheckpoint(FnsError):
    """Checkpoint file truncated or magic mismatched."""


class VersionMismatch(FnsError):
    """Checkpoint format version not supported."""


class SchemaError(FnsError):
    """CSV input does not match the documented column schema."""
