"""Families of analytic discs attached to maximally real targets.

Near a disc A′ whose boundary frame is X(ζ) = Θ(ζ)·diag(ζ^{m_j}), nearby
attached discs are A′ + G(u, f) with

    X⁻¹·G(u, f) = (u − T₀f) + i·f,

where u_j = ζ^{−m_j}·h_j is real for palindromic polynomials h_j and
f = φ(u) solves the attachment condition. In frame coordinates
a + ib = X⁻¹p a target is r(ζ, p) = b − ½·wᵀQ(ζ)w with w = (a, b), so the
condition reads f = q(u − T₀f, f).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import product
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.linalg import null_space, orth, svdvals
from scipy.sparse.linalg import LinearOperator, gmres
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from app.core.config import settings

from .bishop import FRAME_SOLVER_TOL, AnalyticDisc, GraphManifold, bishop_family
from .boundary import BoundaryFunction, BoundaryGrid
from .conjugation import ConjugationKind, conjugate, holomorphic_extension
from .errors import (
    AttachmentError,
    ConvergenceError,
    FixedCenterError,
    GridError,
    GluingError,
    NonContractionError,
    SampleError,
    SingularLinearizationError,
)
from .frames import FrameLoop, IndexProfile, ThetaFrame
from .polynomial import PolynomialMap
from .twist import SPAN_TOL, GluedFamily, span_gap

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping, Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

REAL_U_TOL = 1e-10
FAMILY_SOLVER_TOL = 1e-12
LINEAR_SOLVER_RTOL = 1e-12
# GMRES results that stop short of LINEAR_SOLVER_RTOL are still used up to this relative residual
LINEAR_SOLVER_ACCEPT = 1e-8
GMRES_RESTART = 40
GMRES_MAX_CYCLES = 20
DAMPING_SCHEDULE = (1.0, 0.5, 0.25)
BACKTRACK_STEPS = 8
REMAINDER_TOL = 1e-7
RATIO_RANGE = (3.0, 5.0)
NOISE_FLOOR = 1e-12
FOLIATION_SIGMA_FACTOR = 1e-6
DEFAULT_ANGLE_SAMPLES = 16
STEP4_MIN_INDEX = 4


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a numerical check, serializable as {check, pass, values, tolerances}."""

    check: str
    passed: bool
    values: Mapping[str, Any] = field(default_factory=dict)
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form."""
        return {"check": self.check, "pass": self.passed, "values": dict(self.values), "tolerances": dict(self.tolerances)}


def param_space_dim(profile: IndexProfile | Sequence[int]) -> int:
    """Dimension κ + N of the parameter space for nonnegative indices.

    Args:
        profile: Partial indices, as a profile or a plain sequence.

    Returns:
        Σ(κ_j + 1).

    Raises:
        SampleError: If some index is negative.
    """
    indices = profile.partial if isinstance(profile, IndexProfile) else tuple(profile)
    negative = [j + 1 for j, k in enumerate(indices) if k < 0]
    if negative:
        msg = f"Partial indices must be nonnegative; components {negative} are negative in {tuple(indices)}"
        raise SampleError(msg)
    return sum(k + 1 for k in indices)


@dataclass(frozen=True, eq=False)
class DiscParameters:
    """Real parameters of the palindromic polynomials h_j.

    Component j (κ_j = 2m) owns κ_j + 1 entries t₁, …, t_{2m+1}: the
    complex coefficients c_i = t_{2i+1} + i·t_{2i+2} of ζ^i for i < m, the
    real middle coefficient t_{2m+1} of ζ^m, and conj(c_i) on ζ^{2m−i}.
    """

    profile: tuple[int, ...]
    t: NDArray[np.float64]
    mask: NDArray[np.bool_]

    def __post_init__(self) -> None:
        """Validate the layout and freeze the arrays.

        Raises:
            SampleError: On odd indices, a length mismatch, or nonzero masked entries.
        """
        profile = tuple(int(k) for k in self.profile)
        expected = param_space_dim(profile)
        if any(k % 2 for k in profile):
            msg = f"Parameter layout needs even partial indices, got {profile}"
            raise SampleError(msg)
        t = np.array(self.t, dtype=np.float64)
        mask = np.array(self.mask, dtype=np.bool_)
        if t.shape != (expected,) or mask.shape != (expected,):
            msg = f"Profile {profile} needs {expected} parameters, got t{t.shape} and mask{mask.shape}"
            raise SampleError(msg)
        if np.any(t[~mask] != 0.0):
            msg = "Masked parameters must be exactly zero"
            raise SampleError(msg)
        t.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "profile", profile)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def zeros(cls, profile: Sequence[int]) -> DiscParameters:
        """All parameters zero and free."""
        size = param_space_dim(profile)
        return cls(tuple(profile), np.zeros(size), np.ones(size, dtype=np.bool_))

    @classmethod
    def step4(cls, profile: Sequence[int], values: ArrayLike | None = None) -> DiscParameters:
        """Only t₃ʲ and t₄ʲ free, given interleaved as (t₃¹, t₄¹, t₃², …).

        Raises:
            SampleError: If some κ_j < 4 or values has the wrong length.
        """
        if any(k < STEP4_MIN_INDEX for k in profile):
            msg = f"Step-4 parameters need every partial index >= {STEP4_MIN_INDEX}, got {tuple(profile)}"
            raise SampleError(msg)
        mask = np.zeros(param_space_dim(profile), dtype=np.bool_)
        for offset in _offsets(profile):
            mask[offset + 2 : offset + 4] = True
        params = cls(tuple(profile), np.zeros(mask.size), mask)
        return params if values is None else params.with_values(values)

    def with_values(self, values: ArrayLike) -> DiscParameters:
        """Same layout with the free entries replaced in order.

        Raises:
            SampleError: If the number of values differs from the free count.
        """
        free = np.asarray(values, dtype=np.float64)
        if free.shape != (self.free_count,):
            msg = f"Expected {self.free_count} free parameter values, got shape {free.shape}"
            raise SampleError(msg)
        t = np.zeros_like(self.t)
        t[self.mask] = free
        return DiscParameters(self.profile, t, self.mask)

    @property
    def free_count(self) -> int:
        """Number of free parameters."""
        return int(self.mask.sum())

    @property
    def is_zero(self) -> bool:
        """True when every parameter vanishes."""
        return not np.any(self.t)

    def component(self, j: int) -> NDArray[np.float64]:
        """Parameters t₁ʲ, …, t_{κ_j+1}ʲ of component j."""
        start = _offsets(self.profile)[j]
        return self.t[start : start + self.profile[j] + 1]


def _offsets(profile: Sequence[int]) -> list[int]:
    return [int(x) for x in np.cumsum([0, *[k + 1 for k in profile[:-1]]])]


def poly_h(params: DiscParameters, j: int, grid: BoundaryGrid) -> BoundaryFunction:
    """Sample the palindromic polynomial h_j on the grid.

    Args:
        params: Disc parameters.
        j: Component index (0-based).
        grid: Sample grid.

    Returns:
        Scalar complex boundary function.

    Raises:
        SampleError: If j is not a component of the profile.
        GridError: If the grid cannot hold degree κ_j.
    """
    if not 0 <= j < len(params.profile):
        msg = f"Component {j} out of range for profile {params.profile}"
        raise SampleError(msg)
    m = params.profile[j] // 2
    if 2 * m >= grid.size // 2:
        msg = f"Grid of size {grid.size} cannot hold polynomials of degree {2 * m}"
        raise GridError(msg)
    t = params.component(j)
    lower = t[0 : 2 * m : 2] + 1j * t[1 : 2 * m : 2]
    coeffs = np.zeros(2 * m + 1, dtype=np.complex128)
    coeffs[:m] = lower
    coeffs[m] = t[2 * m]
    coeffs[2 * m - np.arange(m)] = lower.conj()
    return BoundaryFunction.from_samples(np.power.outer(grid.points, np.arange(2 * m + 1)) @ coeffs, grid)


def assemble_u(params: DiscParameters, grid: BoundaryGrid) -> BoundaryFunction:
    """The real vector u_j = ζ^{−m_j}·h_j on the grid.

    Raises:
        SampleError: If some u_j is not real to 1e−10 relative.
    """
    exponents = np.asarray(params.profile) // 2
    samples = np.stack([poly_h(params, j, grid).values[:, 0] for j in range(len(params.profile))], axis=1)
    samples = samples * np.power.outer(grid.points, -exponents)
    scale = max(1.0, float(np.max(np.abs(samples))))
    worst = float(np.max(np.abs(samples.imag)))
    if worst > REAL_U_TOL * scale:
        msg = f"u is not real on the boundary (imaginary part up to {worst:.3e})"
        raise SampleError(msg)
    return BoundaryFunction.from_samples(samples.real, grid, real=True)


@dataclass(frozen=True, eq=False)
class AttachmentTarget:
    """Maximally real targets r(ζ, p) = Im X⁻¹p − q(Re X⁻¹p, Im X⁻¹p).

    ``curvature`` holds symmetric Q_j(ζ_k) of shape (size, N, 2N, 2N) with
    q_j = ½·wᵀQ_j w; ``None`` is the linear target p ∈ L(ζ). The zero sets
    pass through p = 0 and have invertible real differential there because
    X(ζ) is invertible.
    """

    frame: FrameLoop
    curvature: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        """Broadcast and symmetrize the curvature.

        Raises:
            GridError: If the curvature shape does not fit the frame.
        """
        if self.curvature is None:
            return
        size, dim = self.frame.grid.size, self.frame.N
        q = np.asarray(self.curvature, dtype=np.float64)
        if q.shape == (dim, 2 * dim, 2 * dim):
            q = np.broadcast_to(q, (size, dim, 2 * dim, 2 * dim))
        if q.shape != (size, dim, 2 * dim, 2 * dim):
            msg = f"Curvature must have shape ({dim}, {2 * dim}, {2 * dim}) or with a leading {size}, got {q.shape}"
            raise GridError(msg)
        object.__setattr__(self, "curvature", 0.5 * (q + np.swapaxes(q, 2, 3)))

    @classmethod
    def linear(cls, frame: FrameLoop) -> AttachmentTarget:
        """Target whose zero sets are exactly L(ζ)."""
        return cls(frame)

    @classmethod
    def quadratic(cls, frame: FrameLoop, curvature: ArrayLike) -> AttachmentTarget:
        """Target bent by a constant or per-sample quadratic form."""
        return cls(frame, np.asarray(curvature, dtype=np.float64))

    @property
    def N(self) -> int:
        """Number of defining functions."""
        return self.frame.N

    @property
    def linear_flag(self) -> bool:
        """True when every r_j is affine in p."""
        return self.curvature is None or not np.any(self.curvature)

    def quadratic_part(self, a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
        """q(a, b) at every sample, shape (size, N)."""
        if self.curvature is None:
            return np.zeros_like(b)
        w = np.concatenate([a, b], axis=1)
        return 0.5 * np.einsum("kjpq,kp,kq->kj", self.curvature, w, w)

    def gradient(self, a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
        """∂q_j/∂w at every sample, shape (size, N, 2N)."""
        if self.curvature is None:
            return np.zeros((a.shape[0], self.N, 2 * self.N))
        return np.einsum("kjpq,kq->kjp", self.curvature, np.concatenate([a, b], axis=1))

    def residual(self, p: ArrayLike) -> NDArray[np.float64]:
        """r_j(ζ_k, p_k) for displacements p of shape (size, N)."""
        coords = np.linalg.solve(self.frame.matrices, np.asarray(p, dtype=np.complex128)[..., np.newaxis])[..., 0]
        return coords.imag - self.quadratic_part(coords.real, coords.imag)


def _quadratic_map(form: NDArray[np.float64]) -> PolynomialMap:
    """a ↦ (½aᵀQ_j a)_j for symmetric forms of shape (N, N, N)."""
    dim = form.shape[0]
    terms = []
    for j in range(dim):
        for p in range(dim):
            for q in range(p, dim):
                powers = [0] * dim
                powers[p] += 1
                powers[q] += 1
                terms.append((j, 0.5 * form[j, p, p] if p == q else form[j, p, q], powers))
    return PolynomialMap.from_terms(dim, dim, terms)


def manifold_target(
    frame: FrameLoop, hessian: ArrayLike, theta_frame: ThetaFrame, eps: float | None = None
) -> AttachmentTarget:
    """Second-order model of R₁ in the coordinates of the target frame.

    Near A′(ζ), R₁ = {A′ + Xσ + ½H[σ, σ] + O(|σ|³)} where X is the R₁ frame
    and H its second derivatives. Where X′ = Θ·diag(ζ^{m_j}) spans the same
    real subspaces, X′ = X·C with C real, so in a + ib = X′⁻¹p the manifold
    is the graph b = ½aᵀQ(ζ)a + O(|a|³) with Q_j = Im(X′⁻¹H[C·, C·])_j.

    With ``eps`` the frame is twisted on the short arc around θ = π, so the
    quadratic part is glued to the tangent planes there: at every sample
    the curvature is the Hessian of the ``GluedFamily`` built from that
    quadratic graph, at s = θ − π.

    Args:
        frame: R₁ frame loop X.
        hessian: Second derivatives from ``build_R1_hessian``, shape (size, N, N, N).
        theta_frame: Structured (possibly twisted) frame giving X′.
        eps: Twist arc parameter; None for an untwisted frame.

    Returns:
        The quadratic attachment target on X′.

    Raises:
        GridError: If the shapes or grids do not fit.
        GluingError: If X′ leaves the R₁ subspaces where the curvature is kept.
    """
    grid, dim = frame.grid, frame.N
    H = np.asarray(hessian, dtype=np.complex128)
    if theta_frame.grid != grid or theta_frame.N != dim or H.shape != (grid.size, dim, dim, dim):
        msg = f"Hessian of shape {H.shape} and theta frame do not fit an R1 frame with N={dim} on grid {grid.size}"
        raise GridError(msg)
    loop = theta_frame.loop()
    s = grid.angles - np.pi
    kept = np.ones(grid.size, dtype=np.bool_) if eps is None else np.abs(s) > eps / 4
    worst = float(span_gap(frame.matrices, loop.matrices)[kept].max(initial=0.0))
    if worst > SPAN_TOL:
        msg = f"Target frame leaves the R1 subspaces where the curvature is kept (gap {worst:.3e})"
        raise GluingError(msg)
    real_change = np.linalg.solve(frame.matrices, loop.matrices).real
    forms = np.einsum("kjc,kcrs,krp,ksq->kjpq", np.linalg.inv(loop.matrices), H, real_change, real_change).imag

    curvature = np.zeros((grid.size, dim, 2 * dim, 2 * dim))
    if eps is None:
        curvature[:, :, :dim, :dim] = forms
    else:
        curve = PolynomialMap.zero(1, dim)
        for k in np.flatnonzero(kept):
            glued = GluedFamily(phi=_quadratic_map(forms[k]), gamma=curve, eps=eps)
            curvature[k] = -glued.hessian(float(s[k]))
    logger.info("Manifold target on grid %d: largest curvature %.3e", grid.size, float(np.max(np.abs(curvature))))
    return AttachmentTarget.quadratic(loop, curvature)


@dataclass(frozen=True, eq=False)
class NearbyDisc:
    """An attached disc A′ + G(u, φ(u)) with its data."""

    disc: AnalyticDisc
    params: DiscParameters
    u: BoundaryFunction
    f: BoundaryFunction
    residual: float


def _t0(values: NDArray[np.float64], grid: BoundaryGrid) -> NDArray[np.float64]:
    return conjugate(BoundaryFunction.from_samples(values, grid, real=True), ConjugationKind.AT_CENTER).values.real


def _linearization(
    target: AttachmentTarget, u: NDArray[np.float64]
) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    """Solver for J = I + Q_a·T₀ − Q_b at f = 0, applied matrix-free with T₀ by FFT."""
    size, dim = u.shape
    grid = target.frame.grid
    grad = target.gradient(u, np.zeros_like(u))
    q_a, q_b = grad[:, :, :dim], grad[:, :, dim:]

    def matvec(x: NDArray[np.float64]) -> NDArray[np.float64]:
        f = np.asarray(x, dtype=np.float64).reshape(dim, size).T
        out = f + np.einsum("kji,ki->kj", q_a, _t0(f, grid)) - np.einsum("kji,ki->kj", q_b, f)
        return out.T.reshape(-1)

    operator = LinearOperator((size * dim, size * dim), matvec=matvec, dtype=np.float64)

    def solve(r: NDArray[np.float64]) -> NDArray[np.float64]:
        rhs = r.T.reshape(-1)
        step, info = gmres(
            operator, rhs, rtol=LINEAR_SOLVER_RTOL, atol=0.0, restart=GMRES_RESTART, maxiter=GMRES_MAX_CYCLES
        )
        if info == 0 and np.all(np.isfinite(step)):
            return step.reshape(dim, size).T
        residual = float(np.linalg.norm(matvec(step) - rhs)) / max(float(np.linalg.norm(rhs)), NOISE_FLOOR)
        if info < 0 or not residual <= LINEAR_SOLVER_ACCEPT:
            msg = f"Linearized attachment system did not solve (GMRES status {info}, relative residual {residual:.3e})"
            raise SingularLinearizationError(msg)
        return step.reshape(dim, size).T

    return solve


def _quasi_newton(
    residual: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    solve: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    start: NDArray[np.float64],
    damping: float,
    tol: float,
) -> NDArray[np.float64]:
    f = start
    r = residual(f)
    norm = float(np.max(np.abs(r)))
    for iteration in range(1, settings.SOLVER_MAX_ITER + 1):
        step = solve(r)
        scale = damping
        for _ in range(BACKTRACK_STEPS):
            trial = f - scale * step
            r_trial = residual(trial)
            trial_norm = float(np.max(np.abs(r_trial)))
            if trial_norm < norm:
                break
            scale /= 2
        else:
            msg = "Quasi-Newton step does not reduce the attachment residual"
            raise NonContractionError(msg, iteration, norm)
        f, r, norm = trial, r_trial, trial_norm
        logger.debug("Attachment iteration %d: residual %.3e (step scale %g)", iteration, norm, scale)
        if norm < tol:
            logger.info("Attachment solve converged in %d iterations (residual %.3e)", iteration, norm)
            return f
    msg = "Quasi-Newton iteration exceeded its budget"
    raise ConvergenceError(msg, settings.SOLVER_MAX_ITER, norm)


def solve_phi(target: AttachmentTarget, u: BoundaryFunction, tol: float | None = None) -> BoundaryFunction:
    """Solve f = q(u − T₀f, f) for the real N-vector f = φ(u).

    Starts from f = 0 with the linearization at (u, 0) assembled once and
    reused for every step; it is applied matrix-free and solved by GMRES. A
    run that fails is retried with damping halved, at most three times.

    Args:
        target: Attachment target.
        u: Real boundary function in ℝ^N on the target's grid.
        tol: Sup-norm residual target; defaults to ``settings.SOLVER_TOL``.

    Returns:
        f as a real boundary function.

    Raises:
        SampleError: If u is not real or does not fit the target.
        SingularLinearizationError: If the linearized system cannot be solved.
        ConvergenceError: If every damped run fails.
    """
    limit = settings.SOLVER_TOL if tol is None else tol
    grid = target.frame.grid
    if not u.is_real or u.dim != target.N or u.grid != grid:
        msg = f"u must be a real {target.N}-vector on the target grid"
        raise SampleError(msg)
    u_vals = u.values.real

    def residual(f: NDArray[np.float64]) -> NDArray[np.float64]:
        return f - target.quadratic_part(u_vals - _t0(f, grid), f)

    f = np.zeros_like(u_vals)
    if float(np.max(np.abs(residual(f)))) < limit:
        return BoundaryFunction.from_samples(f, grid, real=True)
    solve = _linearization(target, u_vals)
    for attempt in Retrying(
        stop=stop_after_attempt(len(DAMPING_SCHEDULE)),
        retry=retry_if_exception_type(ConvergenceError),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True,
    ):
        with attempt:
            damping = DAMPING_SCHEDULE[attempt.retry_state.attempt_number - 1]
            f = _quasi_newton(residual, solve, np.zeros_like(u_vals), damping, limit)
    return BoundaryFunction.from_samples(f, grid, real=True)


def _fixes_center(params: DiscParameters) -> bool:
    """Y_j(0) = 0 and h_j(0) = 0 for every component."""
    return all(k >= 2 and not np.any(params.component(j)[:2]) for j, k in enumerate(params.profile))


def nearby_disc(
    target: AttachmentTarget,
    base: AnalyticDisc,
    theta_frame: ThetaFrame,
    params: DiscParameters,
    tol: float | None = None,
    *,
    check_center: bool = True,
) -> NearbyDisc:
    """Assemble the attached disc A′ + G(u, φ(u)) for given parameters.

    Args:
        target: Attachment target whose frame is Θ·diag(ζ^{m_j}).
        base: The disc A′.
        theta_frame: Structured frame of the target.
        params: Parameters laid out for the profile 2·m_j.
        tol: Attachment tolerance; defaults to ``settings.SOLVER_TOL``.
        check_center: Verify A′_t(0) = A′(0) when the structure implies it.

    Returns:
        The nearby disc; the base disc itself when every parameter is zero.

    Raises:
        GridError: If the inputs use different grids.
        SampleError: If the profile or the target frame does not match Θ.
        HolomorphyError: If the assembled disc is not holomorphic.
        AttachmentError: If the attachment residual reaches tol.
        FixedCenterError: If the center moves although it should be fixed.
    """
    limit = settings.SOLVER_TOL if tol is None else tol
    grid = theta_frame.grid
    if base.grid != grid or target.frame.grid != grid:
        msg = "Target, base disc and theta frame are sampled on different grids"
        raise GridError(msg)
    if params.profile != theta_frame.profile:
        msg = f"Parameters for profile {params.profile} do not fit theta frame profile {theta_frame.profile}"
        raise SampleError(msg)
    loop = theta_frame.loop().matrices
    mismatch = float(np.max(np.abs(target.frame.matrices - loop)))
    if mismatch > REAL_U_TOL * max(1.0, float(np.max(np.abs(loop)))):
        msg = f"Attachment target frame differs from the theta frame by {mismatch:.3e}"
        raise SampleError(msg)

    if params.is_zero:
        zero = BoundaryFunction.from_samples(np.zeros((grid.size, theta_frame.N)), grid, real=True)
        return NearbyDisc(disc=base, params=params, u=zero, f=zero, residual=0.0)

    u = assemble_u(params, grid)
    f = solve_phi(target, u, limit)
    coords = u.values.real - _t0(f.values.real, grid) + 1j * f.values.real
    variation = np.einsum("kij,kj->ki", loop, coords)
    disc = AnalyticDisc.from_boundary(base.boundary + variation, threshold=settings.NEARBY_HOLOMORPHY_TOL)
    residual = float(np.max(np.abs(target.residual(variation))))
    if residual >= limit:
        raise AttachmentError(residual, limit)
    if check_center and _fixes_center(params):
        drift = float(np.max(np.abs(disc.center_value - base.center_value)))
        if drift > settings.CENTER_TOL:
            msg = f"Disc center moved by {drift:.3e} (tolerance {settings.CENTER_TOL:.1e})"
            raise FixedCenterError(msg)
    return NearbyDisc(disc=disc, params=params, u=u, f=f, residual=residual)


@dataclass(frozen=True, eq=False)
class Step4Family:
    """t ↦ A′_t with only t₃ʲ, t₄ʲ free; t is interleaved (t₃¹, t₄¹, t₃², …)."""

    target: AttachmentTarget
    base: AnalyticDisc
    theta_frame: ThetaFrame
    tol: float = FAMILY_SOLVER_TOL

    @property
    def dim(self) -> int:
        """Number of real parameters, 2N."""
        return 2 * self.theta_frame.N

    def parameters(self, t: ArrayLike) -> DiscParameters:
        """Step-4 parameters for the profile of the theta frame."""
        return DiscParameters.step4(self.theta_frame.profile, t)

    def __call__(self, t: ArrayLike, *, check_center: bool = True) -> NearbyDisc:
        """The disc A′_t."""
        return nearby_disc(
            self.target, self.base, self.theta_frame, self.parameters(t), self.tol, check_center=check_center
        )

    def leading_coefficients(self) -> NDArray[np.complex128]:
        """a = Θ(0)⁻¹·c₁(A′), so that A′(ζ) = A′(0) + Θ(0)a·ζ + O(ζ²)."""
        return np.linalg.solve(self.theta_frame.center(), self.base.boundary.coefficient(1))


def _difference_discs(family: Step4Family, direction: NDArray[np.float64], step: float) -> tuple[AnalyticDisc, AnalyticDisc]:
    return family(step * direction).disc, family(-step * direction).disc


def derivative_check(
    family: Step4Family, rho: float, theta_samples: ArrayLike | None = None, *, step: float | None = None
) -> CheckReport:
    """Compare first-order variations of a Step-4 family with their leading terms.

    For each parameter the central difference of A′_t(ρe^{iθ}) is compared
    with ρe^{iθ}Θ(0)e_j (t₃ʲ) or iρe^{iθ}Θ(0)e_j (t₄ʲ), and with the exact
    first variation Θ(ζ)e_j·∂h_j/∂t. The θ-derivative of A′ is compared
    with ρe^{iθ}Θ(0)(ia₁, …, ia_N). Errors are measured at ρ and ρ/2.

    Args:
        family: Step-4 family.
        rho: Outer radius.
        theta_samples: Angles; 16 equispaced by default.
        step: Finite-difference step; defaults to ``settings.FD_STEP``.

    Returns:
        Report passing when the exact-variation remainder is below 1e−7 and
        every resolved error ratio lies in [3, 5].
    """
    h = settings.FD_STEP if step is None else step
    angles = (
        np.linspace(0.0, 2 * np.pi, DEFAULT_ANGLE_SAMPLES, endpoint=False)
        if theta_samples is None
        else np.asarray(theta_samples, dtype=np.float64)
    )
    theta_frame = family.theta_frame
    center = theta_frame.center()
    a = family.leading_coefficients()
    c1 = family.base.boundary.coefficient(1)
    velocity = family.base.boundary.derivative()
    pairs = [_difference_discs(family, np.eye(family.dim)[idx], h) for idx in range(family.dim)]

    def errors(radius: float) -> tuple[float, float, float]:
        zeta = radius * np.exp(1j * angles)
        t_error = remainder = 0.0
        for idx, (plus, minus) in enumerate(pairs):
            j, imaginary = divmod(idx, 2)
            unit = 1j if imaginary else 1.0
            m = theta_frame.exponents[j]
            fd = (plus(zeta) - minus(zeta)) / (2 * h)
            leading = unit * zeta[:, np.newaxis] * center[:, j]
            dh = unit * (zeta + (-1) ** imaginary * zeta ** (2 * m - 1))
            column = holomorphic_extension(theta_frame.column(j), zeta, threshold=settings.NEARBY_HOLOMORPHY_TOL)
            t_error = max(t_error, float(np.max(np.abs(fd - leading))))
            remainder = max(remainder, float(np.max(np.abs(fd - column * dh[:, np.newaxis]))))
        tangent = holomorphic_extension(velocity, zeta, threshold=settings.NEARBY_HOLOMORPHY_TOL)
        theta_error = float(np.max(np.abs(tangent - 1j * zeta[:, np.newaxis] * c1)))
        return t_error, theta_error, remainder

    outer, inner = errors(rho), errors(rho / 2)
    t_ratio = outer[0] / inner[0] if inner[0] > NOISE_FLOOR else None
    theta_ratio = outer[1] / inner[1] if inner[1] > NOISE_FLOOR else None
    remainder = max(outer[2], inner[2])
    low, high = RATIO_RANGE
    passed = remainder < REMAINDER_TOL and all(r is None or low <= r <= high for r in (t_ratio, theta_ratio))
    logger.info("Derivative check at rho=%g: t ratio %s, theta ratio %s", rho, t_ratio, theta_ratio)
    return CheckReport(
        check="derivative",
        passed=passed,
        values={
            "rho": [rho, rho / 2],
            "a": [[float(c.real), float(c.imag)] for c in a],
            "t_error": [outer[0], inner[0]],
            "t_ratio": t_ratio,
            "theta_error": [outer[1], inner[1]],
            "theta_ratio": theta_ratio,
            "remainder_error": remainder,
        },
        tolerances={"remainder": REMAINDER_TOL, "ratio_min": low, "ratio_max": high},
    )


def theta_direction(family: Step4Family) -> NDArray[np.float64]:
    """The parameter vector (Re ia₁, Im ia₁, …) matching the θ-derivative at first order."""
    ia = 1j * family.leading_coefficients()
    tau = np.empty(family.dim)
    tau[0::2], tau[1::2] = ia.real, ia.imag
    return tau


def default_slice(family: Step4Family) -> NDArray[np.float64]:
    """Parameter directions whose leading terms span a complement of Θ(0)(ia).

    The orthogonal complement of the realified θ-velocity Θ(0)(ia) in ℝ^{2N}
    is pulled back through Θ(0)⁻¹ to parameters t = (Re t₁, Im t₁, …),
    whose leading term at ζ is ζ·Θ(0)t.

    Returns:
        Array of shape (2N, 2N − 1), one parameter direction per column.
    """
    center = family.theta_frame.center()
    tau = theta_direction(family)
    velocity = center @ (tau[0::2] + 1j * tau[1::2])
    realified = np.empty(family.dim)
    realified[0::2], realified[1::2] = velocity.real, velocity.imag
    complement = null_space(realified[np.newaxis, :])
    pulled = np.linalg.solve(center, complement[0::2] + 1j * complement[1::2])
    basis = np.empty_like(complement)
    basis[0::2], basis[1::2] = pulled.real, pulled.imag
    return basis


def foliation_rank(
    family: Step4Family,
    rho_eps: float,
    *,
    slice_basis: ArrayLike | None = None,
    samples: int = DEFAULT_ANGLE_SAMPLES,
    step: float | None = None,
) -> CheckReport:
    """Rank of (θ, t′) ↦ A′_{t′}(ρ_ε e^{iθ}) at t′ = 0 over sampled angles.

    Args:
        family: Step-4 family.
        rho_eps: Radius ρ_ε.
        slice_basis: Columns spanning the slice T′ in parameter space,
            shape (2N, 2N − 1); ``default_slice`` by default.
        samples: Number of equispaced angles.
        step: Finite-difference step.

    Returns:
        Report passing iff the smallest singular value exceeds 1e−6·ρ_ε at every angle.

    Raises:
        SampleError: If the slice basis has the wrong shape.
    """
    h = settings.FD_STEP if step is None else step
    dim = family.dim
    basis = default_slice(family) if slice_basis is None else np.asarray(slice_basis, dtype=np.float64)
    if basis.shape != (dim, dim - 1):
        msg = f"Slice basis must have shape ({dim}, {dim - 1}), got {basis.shape}"
        raise SampleError(msg)
    zeta = rho_eps * np.exp(1j * np.linspace(0.0, 2 * np.pi, samples, endpoint=False))
    columns = [holomorphic_extension(family.base.boundary.derivative(), zeta, threshold=settings.NEARBY_HOLOMORPHY_TOL)]
    for direction in basis.T:
        plus, minus = _difference_discs(family, direction, h)
        columns.append((plus(zeta) - minus(zeta)) / (2 * h))
    jac = np.stack(columns, axis=-1)
    sigma = np.linalg.svd(np.concatenate([jac.real, jac.imag], axis=1), compute_uv=False)
    smallest = sigma[:, -1]
    threshold = FOLIATION_SIGMA_FACTOR * rho_eps
    ranks = (sigma > threshold).sum(axis=1)
    passed = bool(np.all(smallest > threshold))
    if not passed:
        logger.warning("Foliation rank deficient: smallest singular value %.3e", float(smallest.min()))
    return CheckReport(
        check="foliation_rank",
        passed=passed,
        values={
            "rho_eps": rho_eps,
            "rank_min": int(ranks.min()),
            "rank_expected": dim,
            "sigma_min": float(smallest.min()),
            "sigma_min_per_angle": [float(s) for s in smallest],
        },
        tolerances={"sigma_min": threshold},
    )


def normal_complement(M: GraphManifold) -> NDArray[np.float64]:
    """Orthonormal complement of T₀ᶜM in T₀M, realified as (Re p, Im p).

    T₀M is the kernel of the differential of Re z − h(w, Im z) at 0 and
    T₀ᶜM = T₀M ∩ iT₀M. The basis is the polar factor of the projected
    Im z axes, so it reduces to those axes when they span the complement.

    Returns:
        Array of shape (2N, n).
    """
    m, n, dim = M.m, M.n, M.N
    jac = M.h.jacobian(np.zeros(M.h.nvars))
    differential = np.zeros((n, 2 * dim))
    differential[:, :m] = -jac[:, :m]
    differential[:, m:dim] = np.eye(n)
    differential[:, dim : dim + m] = -jac[:, m : 2 * m]
    differential[:, dim + m :] = -jac[:, 2 * m :]
    identity = np.eye(dim)
    complex_structure = np.block([[np.zeros((dim, dim)), -identity], [identity, np.zeros((dim, dim))]])
    tangent = null_space(differential)
    complex_tangent = null_space(np.vstack([differential, differential @ complex_structure]))
    complement = tangent @ null_space(complex_tangent.T @ tangent)
    axes = np.zeros((2 * dim, n))
    axes[dim + m :, :] = np.eye(n)
    left, _, right = np.linalg.svd(complement @ (complement.T @ axes), full_matrices=False)
    return left @ right


def rank_report(M: GraphManifold, rho0: float, *, grid: BoundaryGrid | None = None, step: float | None = None) -> CheckReport:
    """Rank of v ↦ dA/dθ(1) projected to T₀M/T₀ᶜM for the Bishop family A_{ρ₀,0,v}.

    The quotient is realized by ``normal_complement``; for the graphs used
    here it spans the imaginary z-directions.

    Args:
        M: Graphed manifold.
        rho0: Radius ρ₀.
        grid: Sample grid.
        step: Finite-difference step.

    Returns:
        A diagnostic report (always passing) with the rank and the angle
        between the base velocity and the image; the angle is None when
        the base velocity vanishes.
    """
    h = settings.FD_STEP if step is None else step
    grid = grid or BoundaryGrid()
    s = np.zeros(2 * M.m + M.n - 1)
    complement = normal_complement(M)

    def normal_velocity(v: NDArray[np.float64]) -> NDArray[np.float64]:
        disc = bishop_family(M, rho0, s, v, grid=grid, tol=FRAME_SOLVER_TOL)
        velocity = disc.boundary.derivative().values[0]
        return np.concatenate([velocity.real, velocity.imag]) @ complement

    base = normal_velocity(np.zeros(M.n - 1))
    jac = np.zeros((M.n, M.n - 1))
    for i, direction in enumerate(np.eye(M.n - 1)):
        jac[:, i] = (normal_velocity(h * direction) - normal_velocity(-h * direction)) / (2 * h)
    sigma = svdvals(jac) if jac.size else np.zeros(0)
    rank = int(np.sum(sigma > settings.RANK_CUTOFF * max(1.0, float(sigma.max(initial=0.0)))))
    norm = float(np.linalg.norm(base))
    angle: float | None = None
    if norm > NOISE_FLOOR:
        image = orth(jac, rcond=settings.RANK_CUTOFF) if rank else np.zeros((M.n, 0))
        along = float(np.linalg.norm(image.T @ base)) / norm
        angle = float(np.arccos(min(1.0, along)))
    logger.info("Normal rank %d (expected %d), transversality angle %s", rank, M.n - 1, angle)
    return CheckReport(
        check="rank_report",
        passed=True,
        values={"rank": rank, "expected_rank": M.n - 1, "angle": angle, "base_velocity": [float(x) for x in base]},
        tolerances={"rank_cutoff": settings.RANK_CUTOFF},
    )


def family_jacobian_rank(
    target: AttachmentTarget,
    base: AnalyticDisc,
    theta_frame: ThetaFrame,
    *,
    step: float | None = None,
    cutoff: float | None = None,
) -> int:
    """Numeric rank at 0 of the full parameter map params ↦ disc boundary.

    Args:
        target: Attachment target.
        base: Base disc.
        theta_frame: Structured frame of the target.
        step: Finite-difference step.
        cutoff: Relative singular-value cutoff; defaults to ``settings.RANK_CUTOFF``.

    Returns:
        The rank; κ + N for linear targets.
    """
    h = settings.FD_STEP if step is None else step
    rel = settings.RANK_CUTOFF if cutoff is None else cutoff
    params = DiscParameters.zeros(theta_frame.profile)
    columns = []
    for direction in np.eye(params.free_count):
        plus = nearby_disc(target, base, theta_frame, params.with_values(h * direction)).disc.boundary.values
        minus = nearby_disc(target, base, theta_frame, params.with_values(-h * direction)).disc.boundary.values
        diff = (plus - minus) / (2 * h)
        columns.append(np.concatenate([diff.real.ravel(), diff.imag.ravel()]))
    sigma = svdvals(np.stack(columns, axis=1))
    return int(np.sum(sigma > rel * sigma[0]))


def fixed_center_sweep(
    family: Step4Family, radius: float = 0.01, points_per_axis: int = 5
) -> tuple[CheckReport, list[dict[str, float]]]:
    """Check A′_t(0) = A′(0) over a cube grid of t inside the ball of given radius.

    Args:
        family: Step-4 family.
        radius: Ball radius; the cube has half-width radius/√(2N).
        points_per_axis: Grid points per parameter.

    Returns:
        The report and one row per parameter point.
    """
    half = radius / np.sqrt(family.dim)
    axis = np.linspace(-half, half, points_per_axis)
    q = family.base.center_value
    rows: list[dict[str, float]] = []
    worst = 0.0
    for point in product(axis, repeat=family.dim):
        nearby = family(np.array(point), check_center=False)
        drift = float(np.max(np.abs(nearby.disc.center_value - q)))
        worst = max(worst, drift)
        row = {f"t_{i + 1}": float(x) for i, x in enumerate(point)}
        row.update(center_drift=drift, residual=nearby.residual)
        rows.append(row)
    logger.info("Fixed-center sweep over %d points: max drift %.3e", len(rows), worst)
    report = CheckReport(
        check="fixed_center",
        passed=worst < settings.CENTER_TOL,
        values={"points": len(rows), "max_drift": worst, "center": [[float(c.real), float(c.imag)] for c in q]},
        tolerances={"center": settings.CENTER_TOL},
    )
    return report, rows


def write_sweep_csv(rows: Sequence[Mapping[str, float]], path: Path) -> None:
    """Write sweep rows as CSV, one row per parameter point."""
    if not rows:
        msg = "No sweep rows to write"
        raise SampleError(msg)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format(value, ".17g") for key, value in row.items()})
