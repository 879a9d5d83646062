"""Index-raising twists of maximally real frames.

``make_twist`` builds g = ζ^ℓ·h with h = exp(−T₀v + iv) nonvanishing and
holomorphic, and g real on the main arc |θ| <= π − ε/8. Two blends carry
v across the short arc: a Gaussian (erf) ramp whose spectrum decays like a
Gaussian, and the quintic Hermite ramp matched to value and two derivatives
at the arc endpoints, whose spectrum decays only like n⁻⁴. Multiplying a
frame column by h_ℓ raises its partial index by 2ℓ while leaving the
spanned real subspaces unchanged on the main arc.

``glue_tangent_family`` interpolates a polynomial maximally real
manifold with its family of tangent planes along a curve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import erfc

from app.core.config import settings

from .boundary import BoundaryFunction, BoundaryGrid, next_power_of_two
from .conjugation import ConjugationKind, conjugate, winding_number
from .errors import FrameStructureError, GluingError, GridError, SampleError, TwistInvariantError
from .frames import FrameLoop, ThetaFrame, total_index
from .polynomial import PolynomialMap

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

MIN_TWIST_GRID = 256
BLEND_SHARPNESS = 12.0
MAIN_ARC_IMAG_TOL = 1e-8
SPAN_TOL = 1e-7
GLUE_TOL = 1e-10
GLUE_SAMPLES = 33


def twist_grid_size(ell: int, eps: float) -> int:
    """Grid size resolving the phase transition of a twist.

    Args:
        ell: Twist order ℓ.
        eps: Arc parameter ε.

    Returns:
        A power of two, at least 256.
    """
    if ell == 0:
        return MIN_TWIST_GRID
    return next_power_of_two(max(MIN_TWIST_GRID, 64 * ell / eps, 1024 * ell / eps, 4096 / eps))


def main_arc_mask(grid: BoundaryGrid, eps: float) -> NDArray[np.bool_]:
    """Samples with |θ| <= π − ε/8 (θ taken in (−π, π])."""
    signed = np.where(grid.angles > np.pi, grid.angles - 2 * np.pi, grid.angles)
    return np.abs(signed) <= np.pi - eps / 8


class TwistBlend(StrEnum):
    """Shape of the phase ramp across the short arc."""

    GAUSSIAN = "gaussian"
    QUINTIC = "quintic"


@dataclass(frozen=True, eq=False)
class TwistFunction:
    """g = ζ^ℓ·h with h nonvanishing and g real on the main arc."""

    ell: int
    eps: float
    g: BoundaryFunction
    h: BoundaryFunction
    blend: TwistBlend = TwistBlend.GAUSSIAN


def quintic_ramp(s: ArrayLike) -> NDArray[np.float64]:
    """10s³ − 15s⁴ + 6s⁵: rises from 0 to 1 with vanishing first and second derivatives at both ends."""
    x = np.asarray(s, dtype=np.float64)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def twist_phase(
    grid: BoundaryGrid, ell: int, eps: float, blend: TwistBlend = TwistBlend.GAUSSIAN
) -> NDArray[np.float64]:
    """Arg g: zero on the main arc, rising by 2πℓ across the short arc around θ = π.

    The phase is reported in (−πℓ, πℓ], so it jumps by 2πℓ at θ = π where the
    signed angle jumps by −2π.
    """
    psi = np.zeros(grid.size)
    if ell == 0:
        return psi
    delta = eps / 8
    lifted = np.mod(grid.angles - (np.pi - delta), 2 * np.pi)
    short = (lifted > 0) & (lifted < 2 * delta)
    s = lifted[short] / (2 * delta)
    upper = grid.angles[short] <= np.pi
    if blend is TwistBlend.QUINTIC:
        ramp = quintic_ramp(s)
        psi[short] = 2 * np.pi * ell * np.where(upper, ramp, ramp - 1.0)
    else:
        y = BLEND_SHARPNESS * (s - 0.5)
        psi[short] = np.where(upper, np.pi * ell * erfc(-y), -np.pi * ell * erfc(y))
    return psi


def make_twist(
    ell: int, eps: float | None = None, grid: BoundaryGrid | None = None, blend: TwistBlend = TwistBlend.GAUSSIAN
) -> TwistFunction:
    """Build the twist function g_ℓ.

    v equals −ℓθ on the main arc and is continued across the short arc
    |θ − π| < ε/8 by the chosen blend, so that arg g = ℓθ + v is exactly
    zero on the main arc. The quintic blend makes v only C², so h carries an
    algebraic aliasing tail the Gaussian blend avoids; frame twists use
    the Gaussian blend.

    Args:
        ell: Nonnegative twist order ℓ.
        eps: Arc parameter; defaults to ``settings.TWIST_EPS``.
        grid: Sample grid; defaults to ``twist_grid_size(ell, eps)``.
        blend: Ramp shape across the short arc.

    Returns:
        The twist function.

    Raises:
        SampleError: If ell < 0 or eps <= 0.
        GridError: If the grid does not resolve the transition.
        TwistInvariantError: If a constructed invariant fails.
    """
    arc = settings.TWIST_EPS if eps is None else eps
    if ell < 0 or arc <= 0:
        msg = f"Twist needs ell >= 0 and eps > 0, got ell={ell}, eps={arc}"
        raise SampleError(msg)
    required = twist_grid_size(ell, arc)
    grid = grid or BoundaryGrid(required)
    if grid.size < required:
        msg = f"Twist with ell={ell}, eps={arc} needs grid size >= {required}, got {grid.size}"
        raise GridError(msg)

    psi = twist_phase(grid, ell, arc, blend)
    signed = np.where(grid.angles > np.pi, grid.angles - 2 * np.pi, grid.angles)
    v = BoundaryFunction.from_samples(psi - ell * signed, grid, real=True)
    modulus = -conjugate(v, ConjugationKind.AT_CENTER).values.real[:, 0]
    h = BoundaryFunction.from_samples(np.exp(modulus + 1j * v.values.real[:, 0]), grid)
    g = BoundaryFunction.from_samples(np.exp(modulus + 1j * psi), grid)

    smallest = float(np.min(np.abs(h.values)))
    if not smallest > 0.0:
        msg = f"Twist h vanishes (min |h| = {smallest:.3e})"
        raise TwistInvariantError(msg)
    imag = float(np.max(np.abs(g.values[main_arc_mask(grid, arc), 0].imag)))
    if imag >= MAIN_ARC_IMAG_TOL:
        msg = f"Twist g is not real on the main arc (|Im g| up to {imag:.3e})"
        raise TwistInvariantError(msg)
    winding = winding_number(g, 0.0)
    if winding != ell:
        msg = f"Twist g winds {winding} times, expected {ell}"
        raise TwistInvariantError(msg)
    logger.debug("Twist ell=%d eps=%g on grid %d: max |h| %.3e", ell, arc, grid.size, float(np.max(np.abs(h.values))))
    return TwistFunction(ell=ell, eps=arc, g=g, h=h, blend=blend)


def twist_theta(theta_frame: ThetaFrame, ells: Sequence[int], eps: float | None = None) -> ThetaFrame:
    """Twisted distinguished frame: column j of Θ times h_{ℓ_j}, exponent m_j + ℓ_j.

    Args:
        theta_frame: Structured Θ-frame on a grid resolving every twist.
        ells: Twist orders, one per column.
        eps: Arc parameter.

    Returns:
        The twisted Θ-frame.

    Raises:
        SampleError: If the number of twist orders does not match.
    """
    if len(ells) != theta_frame.N:
        msg = f"Got {len(ells)} twist orders for a frame of dimension {theta_frame.N}"
        raise SampleError(msg)
    grid = theta_frame.grid
    factors = np.stack([make_twist(ell, eps, grid).h.values[:, 0] for ell in ells], axis=1)
    exponents = tuple(m + ell for m, ell in zip(theta_frame.exponents, ells, strict=True))
    return ThetaFrame(grid, theta_frame.theta * factors[:, np.newaxis, :], exponents)


def span_gap(reference: NDArray[np.complex128], other: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Per-sample relative size of Im(reference⁻¹·other); zero iff same real span."""
    coords = np.linalg.solve(reference, other)
    return np.abs(coords.imag).max(axis=(1, 2)) / np.abs(coords).max(axis=(1, 2))


def twist_frame(base: FrameLoop, theta_frame: ThetaFrame, ells: Sequence[int], eps: float | None = None) -> FrameLoop:
    """Multiply the structured columns of a (2,0,…,0) frame by twists.

    Args:
        base: Frame loop with total index 2.
        theta_frame: Its structured form (ζΘ₁, Θ₂, …, Θ_N).
        ells: Twist orders ℓ_j.
        eps: Arc parameter.

    Returns:
        The twisted frame, with partial indices (2+2ℓ₁, 2ℓ₂, …, 2ℓ_N).

    Raises:
        SampleError: On a length mismatch.
        GridError: If base and theta frame use different grids.
        FrameStructureError: If the base does not have total index 2, the
            theta frame spans other subspaces, or the twisted frame leaves
            the base subspaces on the main arc.
    """
    arc = settings.TWIST_EPS if eps is None else eps
    if len(ells) != base.N or theta_frame.N != base.N:
        msg = f"Frame dimension {base.N} does not match {theta_frame.N} theta columns and {len(ells)} twist orders"
        raise SampleError(msg)
    if theta_frame.grid != base.grid:
        msg = "Base frame and theta frame are sampled on different grids"
        raise GridError(msg)
    if total_index(base) != 2:
        msg = "Base frame must have total index 2"
        raise FrameStructureError(msg)
    if float(span_gap(base.matrices, theta_frame.loop().matrices).max()) > SPAN_TOL:
        msg = "Theta frame does not span the same real subspaces as the base frame"
        raise FrameStructureError(msg)
    twisted = twist_theta(theta_frame, ells, arc).loop()
    gap = float(span_gap(base.matrices, twisted.matrices)[main_arc_mask(base.grid, arc)].max())
    if gap > SPAN_TOL:
        msg = f"Twisted frame leaves the base subspaces on the main arc (gap {gap:.3e})"
        raise FrameStructureError(msg)
    return twisted


def smooth_step(t: ArrayLike) -> NDArray[np.float64]:
    """C^∞ step: 0 for t <= 0, 1 for t >= 1."""
    x = np.asarray(t, dtype=np.float64)

    def bump(u: NDArray[np.float64]) -> NDArray[np.float64]:
        safe = np.where(u > 0, u, 1.0)
        return np.where(u > 0, np.exp(-1.0 / safe), 0.0)

    left, right = bump(x), bump(1.0 - x)
    return left / (left + right)


@dataclass(frozen=True, eq=False)
class GluedFamily:
    """Defining functions r(s, ·) gluing R = {y = φ(x)} to its tangent planes along γ."""

    phi: PolynomialMap
    gamma: PolynomialMap
    eps: float

    @property
    def N(self) -> int:
        """Complex dimension."""
        return self.phi.ncomp

    def chi(self, s: float) -> float:
        """Cutoff: 0 for |s| <= ε/4, 1 for |s| >= ε/2."""
        quarter = self.eps / 4
        return float(smooth_step((abs(s) - quarter) / quarter))

    def base_point(self, s: float) -> NDArray[np.float64]:
        """x(s)."""
        return self.gamma(np.array([s]))

    def curve_point(self, s: float) -> NDArray[np.complex128]:
        """γ(s) = x(s) + iφ(x(s)) ∈ R."""
        x = self.base_point(s)
        return x + 1j * self.phi(x)

    def tangent_basis(self, s: float) -> NDArray[np.complex128]:
        """Columns e_k + i·∂φ/∂x_k(x(s)) spanning T_{γ(s)}R."""
        return np.eye(self.N) + 1j * self.phi.jacobian(self.base_point(s))

    def defining_polynomial(self, s: float) -> PolynomialMap:
        """r(s, ·) as an exact polynomial in (x₁..x_N, y₁..y_N)."""
        center = self.base_point(s)
        taylor = self.phi.translate(center)
        affine = taylor.truncated(0, 1)
        glued = (affine + taylor.truncated(2).scaled(self.chi(s))).translate(-center)
        dim = self.N
        ys = PolynomialMap.from_terms(
            2 * dim, dim, ((j, 1.0, [1 if v == dim + j else 0 for v in range(2 * dim)]) for j in range(dim))
        )
        return ys - glued.embedded(2 * dim, 0)

    def hessian(self, s: float) -> NDArray[np.float64]:
        """Second derivatives of r(s, ·) at γ(s), shape (N, 2N, 2N) over (x, y)."""
        point = self.curve_point(s)
        return self.defining_polynomial(s).hessian(np.concatenate([point.real, point.imag]))

    def base_polynomial(self) -> PolynomialMap:
        """y − φ(x), the defining functions of R itself."""
        dim = self.N
        ys = PolynomialMap.from_terms(
            2 * dim, dim, ((j, 1.0, [1 if v == dim + j else 0 for v in range(2 * dim)]) for j in range(dim))
        )
        return ys - self.phi.embedded(2 * dim, 0)

    def residual(self, s: float, z: ArrayLike) -> NDArray[np.float64]:
        """r(s, z) for points z ∈ ℂ^N (shape (..., N))."""
        pts = np.asarray(z, dtype=np.complex128)
        return self.defining_polynomial(s)(np.concatenate([pts.real, pts.imag], axis=-1))


def glue_tangent_family(phi: PolynomialMap, gamma: PolynomialMap, eps: float) -> GluedFamily:
    """Build the glued family and check its invariants of defining functions.

    Args:
        phi: Polynomial ℝ^N → ℝ^N with φ(0) = 0 and dφ(0) = 0.
        gamma: Polynomial curve s ↦ x(s) in ℝ^N.
        eps: Half-width of the parameter interval.

    Returns:
        The glued family.

    Raises:
        SampleError: If the inputs have inconsistent shapes or φ has constant/linear terms.
        GluingError: If an invariant check fails.
    """
    if phi.nvars != phi.ncomp or gamma.nvars != 1 or gamma.ncomp != phi.ncomp:
        msg = "phi must map R^N to R^N and gamma must map R to R^N"
        raise SampleError(msg)
    if not phi.is_zero and (phi.min_degree or 0) < 2:
        msg = "phi must vanish to second order at the origin"
        raise SampleError(msg)
    if eps <= 0:
        msg = f"eps must be positive, got {eps}"
        raise SampleError(msg)

    family = GluedFamily(phi=phi, gamma=gamma, eps=eps)
    base = family.base_polynomial()
    dim = family.N
    directions = np.vstack([np.eye(dim), np.ones((1, dim)) / np.sqrt(dim)]) * 0.1
    for s in np.linspace(-eps, eps, GLUE_SAMPLES + 2)[1:-1]:
        point = family.curve_point(s)
        on_curve = float(np.max(np.abs(family.residual(s, point))))
        if on_curve >= GLUE_TOL:
            msg = f"r(s, gamma(s)) = {on_curve:.3e} at s={s:.4f}"
            raise GluingError(msg)
        if abs(s) >= eps / 2:
            gap = family.defining_polynomial(s).max_coefficient_difference(base)
            if gap >= GLUE_TOL:
                msg = f"glued functions differ from the base by {gap:.3e} at s={s:.4f}"
                raise GluingError(msg)
        if abs(s) <= eps / 4:
            tangent = family.tangent_basis(s)
            along = float(np.max(np.abs(family.residual(s, point + directions @ tangent.T))))
            across = family.residual(s, point + 1j * directions)
            normal = float(np.max(np.abs(across - directions)))
            if along >= GLUE_TOL or normal >= GLUE_TOL:
                msg = f"zero set is not the tangent plane at s={s:.4f} (tangent {along:.3e}, normal {normal:.3e})"
                raise GluingError(msg)
    logger.debug("Glued family invariants hold over %d samples", GLUE_SAMPLES)
    return family
