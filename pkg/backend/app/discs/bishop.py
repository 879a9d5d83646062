"""Graphed CR manifolds, the Bishop equation and the R₁ frame.

A generic CR manifold is written as the graph x = h(w, y) over
(w, y) ∈ ℂ^m × ℝ^n. Small analytic discs attached to it are the solutions
of the Bishop equation Y = T₁[h(W, Y)] + y₀, solved here by Picard
iteration on a uniform grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from app.core.config import settings

from .boundary import BoundaryFunction, BoundaryGrid
from .conjugation import (
    ConjugationKind,
    conjugate,
    holomorphic_extension,
    negative_spectrum_mass,
    negative_spectrum_masses,
)
from .errors import ConvergenceError, HolomorphyError, NonContractionError, SampleError
from .frames import FrameLoop
from .polynomial import PolynomialMap

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Mapping

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

MAX_DEGREE = 6
CONTRACTION_FACTOR = 0.9
STALL_LIMIT = 10
# Solver tolerance for the discs differentiated into frame columns
FRAME_SOLVER_TOL = 1e-13
RICHARDSON_CONSISTENCY = 1e-6
CURVATURE_STEP = 1e-2
CURVATURE_CONSISTENCY = 1e-4


@dataclass(frozen=True, eq=False)
class GraphManifold:
    """M = {x = h(w, y)} ⊂ ℂ^{m+n}, h polynomial in (Re w, Im w, y)."""

    m: int
    n: int
    h: PolynomialMap

    def __post_init__(self) -> None:
        """Validate dimensions and the normalization h(0) = 0, dh(0) = 0.

        Raises:
            SampleError: On bad dimensions, degree, or constant/linear terms.
        """
        if self.m < 1 or self.n < 1:
            msg = f"CR dimension and codimension must be positive, got m={self.m}, n={self.n}"
            raise SampleError(msg)
        if (self.h.nvars, self.h.ncomp) != (2 * self.m + self.n, self.n):
            msg = f"h must map {2 * self.m + self.n} real variables to {self.n} components"
            raise SampleError(msg)
        if self.h.degree > MAX_DEGREE:
            msg = f"h has degree {self.h.degree} > {MAX_DEGREE}"
            raise SampleError(msg)
        if not self.h.is_zero and (self.h.min_degree or 0) < 2:
            msg = "h must have no constant or linear terms"
            raise SampleError(msg)

    @classmethod
    def from_terms(cls, m: int, n: int, terms: Iterable[tuple[int, float, Iterable[int]]]) -> GraphManifold:
        """Build from (component, coeff, powers) triples over (Re w, Im w, y)."""
        return cls(m, n, PolynomialMap.from_terms(2 * m + n, n, terms))

    @classmethod
    def flat(cls, m: int, n: int) -> GraphManifold:
        """The flat manifold h ≡ 0."""
        return cls(m, n, PolynomialMap.zero(2 * m + n, n))

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> GraphManifold:
        """Load ``{"m", "n", "terms": [{"coeff", "powers", "component"}, …]}``."""
        m, n = int(data["m"]), int(data["n"])
        return cls(m, n, PolynomialMap.from_json(2 * m + n, n, data.get("terms", [])))

    def to_json(self) -> dict[str, Any]:
        """Serialize as ``{"m", "n", "terms"}``."""
        return {"m": self.m, "n": self.n, "terms": self.h.to_json()}

    @property
    def N(self) -> int:
        """Ambient complex dimension m + n."""
        return self.m + self.n

    def graph(self, w: NDArray[np.complex128], y: NDArray[np.float64]) -> NDArray[np.float64]:
        """Evaluate h at samples w of shape (..., m) and y of shape (..., n)."""
        return self.h(np.concatenate([w.real, w.imag, y], axis=-1))


@dataclass(frozen=True, eq=False)
class AnalyticDisc:
    """Holomorphic disc Δ → ℂ^N given by its boundary trace."""

    boundary: BoundaryFunction
    center_value: NDArray[np.complex128]

    @classmethod
    def from_boundary(cls, boundary: BoundaryFunction, *, threshold: float | None = None) -> AnalyticDisc:
        """Check holomorphy component by component and cache the center.

        Args:
            boundary: Boundary trace in ℂ^N.
            threshold: Negative-spectrum threshold; defaults to ``settings.HOLOMORPHY_TOL``.

        Returns:
            The disc.

        Raises:
            HolomorphyError: If some component does not extend holomorphically.
        """
        limit = settings.HOLOMORPHY_TOL if threshold is None else threshold
        masses = negative_spectrum_masses(boundary)
        worst = int(np.argmax(masses))
        if masses[worst] >= limit:
            raise HolomorphyError(float(masses[worst]), limit, what=f"disc component {worst + 1}")
        return cls(boundary=boundary, center_value=holomorphic_extension(boundary, 0.0, threshold=limit))

    @property
    def N(self) -> int:
        """Number of components."""
        return self.boundary.dim

    @property
    def grid(self) -> BoundaryGrid:
        """Sample grid of the boundary."""
        return self.boundary.grid

    def __call__(self, zeta: ArrayLike) -> NDArray[np.complex128]:
        """Evaluate the disc at interior points."""
        return holomorphic_extension(self.boundary, zeta, threshold=1.0)


@dataclass(frozen=True, eq=False)
class BishopSolution:
    """A converged Bishop solve."""

    disc: AnalyticDisc
    iterations: int
    residual: float


def _assemble(M: GraphManifold, W: BoundaryFunction, Y: NDArray[np.float64]) -> AnalyticDisc:
    Z = M.graph(W.values, Y) + 1j * Y
    return AnalyticDisc.from_boundary(BoundaryFunction.from_samples(np.concatenate([W.values, Z], axis=1), W.grid))


def solve_bishop(
    M: GraphManifold,
    W: BoundaryFunction,
    y0: ArrayLike,
    tol: float | None = None,
    max_iter: int | None = None,
    *,
    initial: ArrayLike | None = None,
) -> BishopSolution:
    """Solve Y = T₁[h(W, Y)] + y₀ by Picard iteration from Y ≡ y₀.

    Args:
        M: Graphed manifold.
        W: Holomorphic w-boundary data in ℂ^m.
        y0: Value of Y at ζ = 1.
        tol: Sup-norm residual target; defaults to ``settings.SOLVER_TOL``.
        max_iter: Iteration budget; defaults to ``settings.SOLVER_MAX_ITER``.
        initial: Optional starting iterate of shape (size, n).

    Returns:
        The solution; ``iterations`` counts evaluations of the fixed-point map.

    Raises:
        SampleError: If W or y0 have the wrong shape.
        HolomorphyError: If W or the assembled disc is not holomorphic.
        NonContractionError: If the residual stops decreasing or blows up.
        ConvergenceError: If max_iter is exceeded.
    """
    target = settings.SOLVER_TOL if tol is None else tol
    budget = settings.SOLVER_MAX_ITER if max_iter is None else max_iter
    y_start = np.asarray(y0, dtype=np.float64)
    if W.dim != M.m or y_start.shape != (M.n,):
        msg = f"Expected W with {M.m} components and y0 of length {M.n}"
        raise SampleError(msg)
    mass = negative_spectrum_mass(W)
    if mass >= settings.HOLOMORPHY_TOL:
        raise HolomorphyError(mass, settings.HOLOMORPHY_TOL, what="w-boundary")

    grid = W.grid
    Y = np.tile(y_start, (grid.size, 1)) if initial is None else np.array(initial, dtype=np.float64)
    previous = np.inf
    stalled = 0
    residual = np.inf
    for iteration in range(1, budget + 1):
        X = BoundaryFunction.from_samples(M.graph(W.values, Y), grid, real=True)
        F = conjugate(X, ConjugationKind.AT_ONE).values.real + y_start
        residual = float(np.max(np.abs(F - Y)))
        logger.debug("Bishop iteration %d: residual %.3e", iteration, residual)
        if not np.isfinite(residual):
            msg = "Bishop iteration diverged"
            raise NonContractionError(msg, iteration, residual)
        if residual < target:
            logger.info("Bishop solve converged in %d iterations (residual %.3e)", iteration, residual)
            return BishopSolution(disc=_assemble(M, W, Y), iterations=iteration, residual=residual)
        stalled = stalled + 1 if residual > CONTRACTION_FACTOR * previous else 0
        if stalled >= STALL_LIMIT:
            msg = "Bishop iteration is not contracting"
            raise NonContractionError(msg, iteration, residual)
        previous = residual
        Y = F
    msg = "Bishop iteration exceeded its budget"
    raise ConvergenceError(msg, budget, residual)


def attachment_residual(M: GraphManifold, disc: AnalyticDisc) -> float:
    """max over the grid of |X − h(W, Y)| for the disc boundary."""
    values = disc.boundary.values
    w, z = values[:, : M.m], values[:, M.m :]
    return float(np.max(np.abs(z.real - M.graph(w, z.imag))))


def reference_disc(M: GraphManifold, rho0: float, grid: BoundaryGrid | None = None) -> AnalyticDisc:
    """The disc with W = (ρ₀ − ρ₀ζ, 0, …, 0) and y₀ = 0.

    Args:
        M: Graphed manifold.
        rho0: Positive radius ρ₀.
        grid: Sample grid; defaults to ``settings.DEFAULT_GRID_SIZE``.

    Returns:
        The reference disc.

    Raises:
        SampleError: If rho0 <= 0 or the w₁-boundary fails its half-plane check.
    """
    if rho0 <= 0:
        msg = f"rho0 must be positive, got {rho0}"
        raise SampleError(msg)
    grid = grid or BoundaryGrid()
    w = np.zeros((grid.size, M.m), dtype=np.complex128)
    w[:, 0] = rho0 - rho0 * grid.points
    if abs(w[0, 0]) > 1e-12 or np.any(w[1:, 0].real <= 0):
        msg = "Reference w1-boundary must vanish at 1 and have positive real part elsewhere"
        raise SampleError(msg)
    return solve_bishop(M, BoundaryFunction.from_samples(w, grid), np.zeros(M.n)).disc


def perturbed_disc(
    M: GraphManifold,
    base_W: BoundaryFunction,
    u_star: ArrayLike,
    y: ArrayLike,
    y0: ArrayLike,
    *,
    tol: float | None = None,
) -> AnalyticDisc:
    """Solve Y = T₁[h(W + (0, u*), Y)] + y₀ + y.

    Args:
        M: Graphed manifold.
        base_W: w-boundary of the base disc.
        u_star: Interleaved (Re u₂, Im u₂, …, Re u_m, Im u_m).
        y: Shift of the normalization value.
        y0: Base normalization value.
        tol: Solver tolerance.

    Returns:
        The perturbed disc.

    Raises:
        SampleError: If u_star has the wrong length.
    """
    shifts = np.asarray(u_star, dtype=np.float64)
    if shifts.shape != (2 * (M.m - 1),):
        msg = f"u_star must have length {2 * (M.m - 1)}, got {shifts.shape}"
        raise SampleError(msg)
    offset = np.concatenate([[0.0], shifts[0::2] + 1j * shifts[1::2]])
    y_total = np.asarray(y0, dtype=np.float64) + np.asarray(y, dtype=np.float64)
    return solve_bishop(M, base_W + offset, y_total, tol).disc


def bishop_family(
    M: GraphManifold,
    rho: float,
    s: ArrayLike,
    v: ArrayLike,
    *,
    grid: BoundaryGrid | None = None,
    tol: float | None = None,
) -> AnalyticDisc:
    """The deformation A_{ρ,s,v} of the reference disc.

    W = δw + (ρ − ρζ)e₁ where δw = s[:m] + i·s[m:2m]; y₀ places s[2m:] in
    components 1..n−1 and adds v to components 2..n. A_{0,s,v} is
    constant and A_{ρ₀,0,0} is the reference disc.

    Args:
        M: Graphed manifold.
        rho: Radius ρ >= 0.
        s: Parameters in ℝ^{2m+n−1}.
        v: Parameters in ℝ^{n−1}.
        grid: Sample grid.
        tol: Solver tolerance.

    Returns:
        The disc.

    Raises:
        SampleError: If s or v have the wrong length.
    """
    s_arr, v_arr = np.asarray(s, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if s_arr.shape != (2 * M.m + M.n - 1,) or v_arr.shape != (M.n - 1,):
        msg = f"Expected s of length {2 * M.m + M.n - 1} and v of length {M.n - 1}"
        raise SampleError(msg)
    grid = grid or BoundaryGrid()
    w = np.tile(s_arr[: M.m] + 1j * s_arr[M.m : 2 * M.m], (grid.size, 1))
    w[:, 0] += rho - rho * grid.points
    y0 = np.concatenate([s_arr[2 * M.m :], [0.0]]) + np.concatenate([[0.0], v_arr])
    return solve_bishop(M, BoundaryFunction.from_samples(w, grid), y0, tol).disc


def _richardson(sample: Callable[[float], NDArray[np.complex128]], step: float) -> NDArray[np.complex128]:
    """Central difference at step and step/2, combined to fourth order."""
    coarse = (sample(step) - sample(-step)) / (2 * step)
    fine = (sample(step / 2) - sample(-step / 2)) / step
    gap = float(np.max(np.abs(fine - coarse)))
    if gap > RICHARDSON_CONSISTENCY * max(1.0, float(np.max(np.abs(fine)))):
        msg = "Finite differences at step and step/2 disagree"
        raise ConvergenceError(msg, 2, gap)
    return (4 * fine - coarse) / 3


def build_R1_frame(M: GraphManifold, base: AnalyticDisc, *, step: float | None = None) -> FrameLoop:
    """Frame loop of the maximally real manifold R₁ swept by perturbed discs.

    Column 1 is ∂A/∂θ; columns 2..m differentiate along real shifts of
    w₂..w_m; columns m+1..N differentiate along the normalization y.

    Args:
        M: Graphed manifold.
        base: Disc produced by the Bishop solver over M.
        step: Finite-difference step; defaults to ``settings.FD_STEP``.

    Returns:
        The frame loop.

    Raises:
        SampleError: If base does not have m + n components.
        SingularFrameError: If the frame degenerates at some sample.
    """
    h = settings.FD_STEP if step is None else step
    if base.N != M.N:
        msg = f"Base disc has {base.N} components, manifold needs {M.N}"
        raise SampleError(msg)
    W = BoundaryFunction.from_samples(base.boundary.values[:, : M.m], base.grid)
    y0 = base.boundary.values[0, M.m :].imag
    columns = [base.boundary.derivative().values]
    zero_u, zero_y = np.zeros(2 * (M.m - 1)), np.zeros(M.n)

    for k in range(M.m - 1):
        direction = np.zeros(2 * (M.m - 1))
        direction[2 * k] = 1.0
        columns.append(
            _richardson(
                lambda t, d=direction: perturbed_disc(M, W, t * d, zero_y, y0, tol=FRAME_SOLVER_TOL).boundary.values, h
            )
        )
    for j in range(M.n):
        direction = np.zeros(M.n)
        direction[j] = 1.0
        columns.append(
            _richardson(
                lambda t, d=direction: perturbed_disc(M, W, zero_u, t * d, y0, tol=FRAME_SOLVER_TOL).boundary.values, h
            )
        )
    logger.info("Built R1 frame for m=%d, n=%d on grid %d", M.m, M.n, base.grid.size)
    return FrameLoop(base.grid, np.stack(columns, axis=-1))


def _second_difference(sample: Callable[[float, float], NDArray[np.complex128]], step: float) -> NDArray[np.complex128]:
    """Mixed second difference of sample(s, t) at 0, Richardson-combined over step and step/2."""

    def stencil(h: float) -> NDArray[np.complex128]:
        return (sample(h, h) - sample(h, -h) - sample(-h, h) + sample(-h, -h)) / (4 * h * h)

    coarse, fine = stencil(step), stencil(step / 2)
    gap = float(np.max(np.abs(fine - coarse)))
    if gap > CURVATURE_CONSISTENCY * max(1.0, float(np.max(np.abs(fine)))):
        msg = "Second differences at step and step/2 disagree"
        raise ConvergenceError(msg, 2, gap)
    return (4 * fine - coarse) / 3


def build_R1_hessian(
    M: GraphManifold, base: AnalyticDisc, frame: FrameLoop, *, step: float | None = None
) -> NDArray[np.complex128]:
    """Second derivatives of the parametrization of R₁ along the base disc.

    R₁ is swept by σ = (θ, Re u₂, …, Re u_m, y₁, …, y_n) ↦ A_{u,y}(e^{iθ});
    the frame columns are its first derivatives. Derivatives involving θ
    are taken spectrally from the frame columns, the others by second
    differences of perturbed discs.

    Args:
        M: Graphed manifold.
        base: Disc produced by the Bishop solver over M.
        frame: Its R₁ frame from ``build_R1_frame``.
        step: Second-difference step; defaults to 1e−2.

    Returns:
        Array of shape (size, N, N, N) whose entry [k, :, p, q] is
        ∂²A/∂σ_p∂σ_q at ζ_k, symmetric in (p, q).

    Raises:
        SampleError: If the frame does not belong to the base disc.
        ConvergenceError: If the second differences are not resolved.
    """
    h = CURVATURE_STEP if step is None else step
    if frame.grid != base.grid or frame.N != M.N or base.N != M.N:
        msg = "Frame, base disc and manifold do not fit together"
        raise SampleError(msg)
    grid, dim = base.grid, M.N
    W = BoundaryFunction.from_samples(base.boundary.values[:, : M.m], grid)
    y0 = base.boundary.values[0, M.m :].imag

    def shifted(sigma: NDArray[np.float64]) -> NDArray[np.complex128]:
        u = np.zeros(2 * (M.m - 1))
        u[0::2] = sigma[: M.m - 1]
        return perturbed_disc(M, W, u, sigma[M.m - 1 :], y0, tol=FRAME_SOLVER_TOL).boundary.values

    hess = np.zeros((grid.size, dim, dim, dim), dtype=np.complex128)
    for p in range(dim):
        along = BoundaryFunction.from_samples(frame.matrices[:, :, p], grid).derivative().values
        hess[:, :, 0, p] = along
        hess[:, :, p, 0] = along
    units = np.eye(dim - 1)
    for p, q in ((p, q) for p in range(dim - 1) for q in range(p, dim - 1)):
        second = _second_difference(lambda s, t, p=p, q=q: shifted(s * units[p] + t * units[q]), h)
        hess[:, :, p + 1, q + 1] = second
        hess[:, :, q + 1, p + 1] = second
    logger.info("Built R1 second derivatives for m=%d, n=%d on grid %d", M.m, M.n, grid.size)
    return hess
