"""Exceptions raised by the analytic-disc library.

Errors carry the numbers a caller needs to report a failure (masses,
residuals, angles) as attributes in addition to the formatted message.
"""

from __future__ import annotations


class DiscsError(Exception):
    """Base class for every library error."""


class GridError(DiscsError, ValueError):
    """A grid is malformed or too coarse for the requested operation."""


class SampleError(DiscsError, ValueError):
    """Boundary samples are malformed (wrong length, non-finite, non-real)."""


class HolomorphyError(DiscsError, ValueError):
    """Boundary data does not extend holomorphically to the disc."""

    def __init__(self, mass: float, threshold: float, what: str = "boundary data") -> None:
        """Record the offending negative-spectrum mass.

        Args:
            mass: Measured negative-spectrum mass.
            threshold: Threshold the mass had to stay below.
            what: Short description of the checked object.
        """
        self.mass = mass
        self.threshold = threshold
        super().__init__(f"{what} is not holomorphic: negative spectrum mass {mass:.3e} >= {threshold:.1e}")


class WindingError(DiscsError, ValueError):
    """A winding number cannot be computed reliably."""


class ConvergenceError(DiscsError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float) -> None:
        """Record where the iteration stopped.

        Args:
            message: Human-readable description.
            iterations: Number of iterations performed.
            residual: Last residual reached.
        """
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class NonContractionError(ConvergenceError):
    """A fixed-point iteration stopped contracting."""


class FrameStructureError(DiscsError, ValueError):
    """A frame lacks the structure an operation relies on (total index, spanned subspaces)."""


class SingularFrameError(DiscsError, ValueError):
    """A frame matrix is (numerically) singular at some sample."""

    def __init__(self, angle: float, sigma_min: float, threshold: float) -> None:
        """Record the worst sample.

        Args:
            angle: Sample angle in [0, 2π) where the smallest singular value occurs.
            sigma_min: Smallest singular value found.
            threshold: Required lower bound.
        """
        self.angle = angle
        self.sigma_min = sigma_min
        super().__init__(f"frame is singular at theta={angle:.6f}: smallest singular value {sigma_min:.3e} <= {threshold:.1e}")


class UnstableDimensionError(DiscsError, RuntimeError):
    """A numerical dimension count did not stabilize."""


class IndexInconsistencyError(DiscsError, RuntimeError):
    """Recovered partial indices disagree with the total index."""

    def __init__(self, partial_sum: int, total: int) -> None:
        """Record both totals.

        Args:
            partial_sum: Sum of the recovered partial indices.
            total: Total index from the determinant winding.
        """
        self.partial_sum = partial_sum
        self.total = total
        super().__init__(f"sum of partial indices {partial_sum} differs from total index {total}")


class TwistInvariantError(DiscsError, RuntimeError):
    """A constructed twist function violates one of its invariants."""


class GluingError(DiscsError, RuntimeError):
    """A glued defining-function family failed one of its invariant checks."""


class AttachmentError(DiscsError, RuntimeError):
    """A disc is not attached to its target within tolerance."""

    def __init__(self, residual: float, tol: float) -> None:
        """Record the attachment residual.

        Args:
            residual: Measured sup-norm residual.
            tol: Allowed residual.
        """
        self.residual = residual
        super().__init__(f"attachment residual {residual:.3e} exceeds tolerance {tol:.1e}")


class FixedCenterError(DiscsError, RuntimeError):
    """A disc family that should fix its center moved it."""


class SingularLinearizationError(DiscsError, RuntimeError):
    """The linearized attachment system cannot be factored."""
