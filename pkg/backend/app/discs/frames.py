"""Loops of maximally real frames and their partial indices.

A ``FrameLoop`` samples ζ ↦ G(ζ) ∈ GL(N, ℂ); its columns are a real
basis of a maximally real subspace L(ζ). Partial indices are recovered
from kernel dimensions of shifted loops instead of an explicit Birkhoff
factorization: D(k), the real dimension of holomorphic sections of
ζ^{−k}·G, equals Σ_j max(κ_j − 2k + 1, 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.linalg import svdvals

from app.core.config import settings

from .boundary import BoundaryFunction, BoundaryGrid
from .conjugation import negative_spectrum_mass, winding_number
from .errors import (
    GridError,
    HolomorphyError,
    IndexInconsistencyError,
    SampleError,
    SingularFrameError,
    UnstableDimensionError,
    WindingError,
)

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

# Fourier coefficients below this fraction of the largest one are ignored
# when sizing the polynomial degree of sections.
BANDWIDTH_FLOOR = 1e-11
DEGREE_MARGIN = 24
MIN_SECTION_DEGREE = 8


@dataclass(frozen=True, eq=False)
class FrameLoop:
    """Samples G(ζ_k) of a loop of invertible N×N complex matrices."""

    grid: BoundaryGrid
    matrices: NDArray[np.complex128]
    min_singular_value: float = field(init=False)

    def __post_init__(self) -> None:
        """Validate shape and invertibility.

        Raises:
            GridError: If the matrix array does not match the grid.
            SingularFrameError: If some G(ζ_k) is numerically singular.
        """
        mats = np.asarray(self.matrices, dtype=np.complex128)
        if mats.ndim != 3 or mats.shape[0] != self.grid.size or mats.shape[1] != mats.shape[2]:
            msg = f"Expected matrices of shape ({self.grid.size}, N, N), got {mats.shape}"
            raise GridError(msg)
        if not np.all(np.isfinite(mats)):
            msg = "Frame matrices contain non-finite entries"
            raise GridError(msg)
        sigma = np.linalg.svd(mats, compute_uv=False)[:, -1]
        worst = int(np.argmin(sigma))
        if sigma[worst] <= settings.FRAME_MIN_SINGULAR:
            raise SingularFrameError(float(self.grid.angles[worst]), float(sigma[worst]), settings.FRAME_MIN_SINGULAR)
        mats.flags.writeable = False
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "min_singular_value", float(sigma[worst]))

    @classmethod
    def from_columns(cls, columns: Sequence[BoundaryFunction]) -> FrameLoop:
        """Assemble a loop whose j-th column is the j-th function."""
        grid = columns[0].grid
        return cls(grid, np.stack([col.values for col in columns], axis=-1))

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> FrameLoop:
        """Load ``{"grid_size", "N", "matrices"}`` with row-major re/im pairs per sample."""
        size, dim = int(data["grid_size"]), int(data["N"])
        raw = np.asarray(data["matrices"], dtype=np.float64).reshape(size, dim, dim, 2)
        return cls(BoundaryGrid(size), raw[..., 0] + 1j * raw[..., 1])

    def to_json(self) -> dict[str, Any]:
        """Serialize as ``{"grid_size", "N", "matrices"}``."""
        pairs = np.stack([self.matrices.real, self.matrices.imag], axis=-1).reshape(self.grid.size, -1, 2)
        return {"grid_size": self.grid.size, "N": self.N, "matrices": pairs.tolist()}

    @property
    def N(self) -> int:
        """Frame dimension."""
        return self.matrices.shape[1]

    def column(self, j: int) -> BoundaryFunction:
        """Column j as a boundary function in ℂ^N."""
        return BoundaryFunction.from_samples(self.matrices[:, :, j], self.grid)

    def determinant(self) -> BoundaryFunction:
        """The scalar loop det G(ζ)."""
        return BoundaryFunction.from_samples(np.linalg.det(self.matrices), self.grid)

    def shifted(self, k: int) -> FrameLoop:
        """The loop ζ^k·G (raises every partial index by 2k)."""
        return FrameLoop(self.grid, self.matrices * (self.grid.points**k)[:, np.newaxis, np.newaxis])

    def permuted(self, order: Sequence[int]) -> FrameLoop:
        """Reorder the columns."""
        return FrameLoop(self.grid, self.matrices[:, :, list(order)])

    def gauged(self, real_matrix: ArrayLike) -> FrameLoop:
        """Right-multiply by a fixed real invertible matrix (same L(ζ)).

        Raises:
            SampleError: If the gauge matrix is not real.
        """
        gauge = np.asarray(real_matrix)
        if np.iscomplexobj(gauge):
            msg = "Gauge matrix must be real"
            raise SampleError(msg)
        return FrameLoop(self.grid, self.matrices @ gauge)

    def realified(self) -> NDArray[np.float64]:
        """Real 2N×2N matrices [[Re G, −Im G], [Im G, Re G]] per sample."""
        re, im = self.matrices.real, self.matrices.imag
        top = np.concatenate([re, -im], axis=2)
        bottom = np.concatenate([im, re], axis=2)
        return np.concatenate([top, bottom], axis=1)


@dataclass(frozen=True)
class IndexProfile:
    """Partial indices κ₁ >= … >= κ_N with the total index."""

    partial: tuple[int, ...]
    total: int
    # D(k) per shift k, plus Birkhoff kernel counts at any odd shift consulted
    section_dims: Mapping[int, int] = field(default_factory=dict)
    odd_shift_dims: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate ordering, sum and parity.

        Raises:
            SampleError: If the profile is unsorted, inconsistent or odd.
        """
        if list(self.partial) != sorted(self.partial, reverse=True):
            msg = f"Partial indices must be sorted descending, got {self.partial}"
            raise SampleError(msg)
        if sum(self.partial) != self.total:
            msg = f"Total index {self.total} differs from sum of partial indices {self.partial}"
            raise SampleError(msg)
        if self.total % 2:
            msg = f"Total index must be even, got {self.total}"
            raise SampleError(msg)

    @property
    def N(self) -> int:
        """Number of partial indices."""
        return len(self.partial)


@dataclass(frozen=True, eq=False)
class ThetaFrame:
    """Distinguished frame Θ(ζ)·diag(ζ^{m_j}) of a structured loop.

    Θ extends holomorphically and invertibly to the closed disc; the loop
    it represents has partial indices 2·m_j.
    """

    grid: BoundaryGrid
    theta: NDArray[np.complex128]
    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate shapes.

        Raises:
            GridError: If theta or exponents do not match.
        """
        if self.theta.shape != (self.grid.size, len(self.exponents), len(self.exponents)):
            msg = f"Theta shape {self.theta.shape} does not match grid and {len(self.exponents)} exponents"
            raise GridError(msg)
        self.theta.flags.writeable = False

    @property
    def N(self) -> int:
        """Frame dimension."""
        return len(self.exponents)

    @property
    def profile(self) -> tuple[int, ...]:
        """Partial indices 2·m_j in column order."""
        return tuple(2 * m for m in self.exponents)

    def powers(self) -> NDArray[np.complex128]:
        """Samples of ζ^{m_j}, shape (size, N)."""
        return np.power.outer(self.grid.points, np.asarray(self.exponents))

    def loop(self) -> FrameLoop:
        """The frame loop X(ζ) = Θ(ζ)·diag(ζ^{m_j})."""
        return FrameLoop(self.grid, self.theta * self.powers()[:, np.newaxis, :])

    def center(self) -> NDArray[np.complex128]:
        """Θ(0), the zeroth Fourier coefficient of every entry."""
        return self.theta.mean(axis=0)

    def column(self, j: int) -> BoundaryFunction:
        """Θ_j as a boundary function."""
        return BoundaryFunction.from_samples(self.theta[:, :, j], self.grid)


def structured_theta(frame: FrameLoop, exponents: Sequence[int], *, threshold: float | None = None) -> ThetaFrame:
    """Divide known powers ζ^{m_j} out of the columns of a structured loop.

    Args:
        frame: Loop whose column j equals ζ^{m_j}·Θ_j with Θ holomorphic.
        exponents: The powers m_j.
        threshold: Holomorphy threshold; defaults to ``settings.HOLOMORPHY_TOL``.

    Returns:
        The Θ-frame.

    Raises:
        GridError: If the exponent count does not match the frame.
        HolomorphyError: If some Θ_j does not extend holomorphically.
        WindingError: If det Θ winds around the origin.
    """
    limit = settings.HOLOMORPHY_TOL if threshold is None else threshold
    exps = tuple(int(m) for m in exponents)
    if len(exps) != frame.N:
        msg = f"Got {len(exps)} exponents for a frame of dimension {frame.N}"
        raise GridError(msg)
    powers = np.power.outer(frame.grid.points, -np.asarray(exps))
    result = ThetaFrame(frame.grid, frame.matrices * powers[:, np.newaxis, :], exps)
    for j in range(result.N):
        mass = negative_spectrum_mass(result.column(j))
        if mass >= limit:
            raise HolomorphyError(mass, limit, what=f"Theta column {j + 1}")
    det = BoundaryFunction.from_samples(np.linalg.det(result.theta), frame.grid)
    winding = winding_number(det, 1e-12 * float(np.max(np.abs(det.values))))
    if winding != 0:
        msg = f"det Theta winds {winding} times; Theta is not invertible on the closed disc"
        raise WindingError(msg)
    return result


def b_loop(F: FrameLoop) -> NDArray[np.complex128]:
    """B(ζ) = G(ζ)·conj(G(ζ))⁻¹ at every sample.

    Args:
        F: Frame loop.

    Returns:
        Array of shape (size, N, N).

    Raises:
        SingularFrameError: If conj(G) is too ill-conditioned to invert.
    """
    sigma = np.linalg.svd(F.matrices, compute_uv=False)
    ratio = sigma[:, -1] / sigma[:, 0]
    worst = int(np.argmin(ratio))
    if ratio[worst] < 1e3 * np.finfo(np.float64).eps:
        raise SingularFrameError(float(F.grid.angles[worst]), float(sigma[worst, -1]), settings.FRAME_MIN_SINGULAR)
    g_t = np.swapaxes(F.matrices, 1, 2)
    return np.swapaxes(np.linalg.solve(g_t.conj(), g_t), 1, 2)


def total_index(F: FrameLoop) -> int:
    """Maslov index: twice the winding number of det G.

    Args:
        F: Frame loop.

    Returns:
        The total index.
    """
    det = F.determinant()
    return 2 * winding_number(det, 1e-12 * float(np.max(np.abs(det.values))))


def _bandwidth(samples: NDArray[np.complex128]) -> int:
    coeffs = np.abs(np.fft.fft(samples, axis=0)).reshape(samples.shape[0], -1).max(axis=1)
    freqs = np.fft.fftfreq(samples.shape[0], d=1.0 / samples.shape[0])
    significant = coeffs > BANDWIDTH_FLOOR * coeffs.max()
    return int(np.max(np.abs(freqs[significant]), initial=0))


def _normalized_inverse(matrices: NDArray[np.complex128]) -> NDArray[np.complex128]:
    inverse = np.linalg.inv(matrices)
    return inverse / np.linalg.norm(inverse, axis=2, keepdims=True)


def section_degree(F: FrameLoop) -> int:
    """Polynomial degree large enough to represent sections of F.

    Args:
        F: Frame loop.

    Returns:
        The degree.

    Raises:
        GridError: If the grid is too coarse for the frame's bandwidth.
    """
    band = max(_bandwidth(F.matrices), _bandwidth(_normalized_inverse(F.matrices)))
    degree = max(MIN_SECTION_DEGREE, band + DEGREE_MARGIN)
    limit = F.grid.size // 4 - 2
    if degree > limit:
        msg = f"Grid of size {F.grid.size} does not resolve a frame of bandwidth {band}"
        raise GridError(msg)
    return degree


def _numerical_nullity(system: NDArray, cutoff: float) -> int:
    sigma = svdvals(system)
    if sigma.size == 0 or sigma[0] == 0.0:
        return system.shape[1]
    return system.shape[1] - int(np.sum(sigma > cutoff * sigma[0]))


def _section_nullity(F: FrameLoop, degree: int, cutoff: float) -> int:
    size, dim = F.grid.size, F.N
    rows = _normalized_inverse(F.matrices)
    vander = np.power.outer(F.grid.points, np.arange(degree + 1))
    system = np.einsum("kij,kn->kinj", rows, vander).reshape(size * dim, (degree + 1) * dim)
    return _numerical_nullity(np.hstack([system.imag, system.real]), cutoff)


def holomorphic_section_dim(
    F: FrameLoop, degree: int | None = None, *, cutoff: float | None = None, check_plateau: bool = True
) -> int:
    """Real dimension of polynomial sections u with u(ζ) ∈ L(ζ) on ∂Δ.

    Solves Im(G(ζ_k)⁻¹u(ζ_k)) = 0 for u = Σ_{n<=degree} c_n ζ^n; rows of
    G⁻¹ are normalized per sample (a real row scaling).

    Args:
        F: Frame loop.
        degree: Polynomial degree; sized from the frame bandwidth by default.
        cutoff: Relative singular-value cutoff; defaults to ``settings.RANK_CUTOFF``.
        check_plateau: Also solve at degree + 2 and require the same count.

    Returns:
        The dimension.

    Raises:
        SampleError: If degree < 1.
        GridError: If the grid does not resolve 2·degree modes.
        UnstableDimensionError: If the count changes between degree and degree + 2.
    """
    rel = settings.RANK_CUTOFF if cutoff is None else cutoff
    deg = section_degree(F) if degree is None else degree
    if deg < 1:
        msg = f"Section degree must be >= 1, got {deg}"
        raise SampleError(msg)
    if 2 * (deg + 2) > F.grid.size // 2:
        msg = f"Grid of size {F.grid.size} does not resolve sections of degree {deg}"
        raise GridError(msg)
    dim = _section_nullity(F, deg, rel)
    if check_plateau:
        again = _section_nullity(F, deg + 2, rel)
        if again != dim:
            msg = f"Section dimension not stable: {dim} at degree {deg}, {again} at degree {deg + 2}"
            raise UnstableDimensionError(msg)
    return dim


def birkhoff_kernel_dim(F: FrameLoop, shift: int, degree: int | None = None, *, cutoff: float | None = None) -> int:
    """Complex dimension of solutions of ζ^{−shift}·B·ψ⁻ = ψ⁺.

    ψ⁺ is holomorphic in the disc and ψ⁻ holomorphic outside (bounded at
    infinity); the count equals Σ_j max(κ_j − shift + 1, 0) for every
    integer shift, odd ones included.

    Args:
        F: Frame loop.
        shift: Integer shift s.
        degree: Polynomial degree of ψ±; sized from the frame by default.
        cutoff: Relative singular-value cutoff.

    Returns:
        The dimension.
    """
    rel = settings.RANK_CUTOFF if cutoff is None else cutoff
    deg = section_degree(F) if degree is None else degree
    size, dim = F.grid.size, F.N
    points = F.grid.points
    b = b_loop(F) * (points ** (-shift))[:, np.newaxis, np.newaxis]
    orders = np.arange(deg + 1)
    outer = np.einsum("kij,kn->kinj", b, np.power.outer(points.conj(), orders)).reshape(size * dim, -1)
    inner = np.einsum("ij,kn->kinj", np.eye(dim), np.power.outer(points, orders)).reshape(size * dim, -1)
    return _numerical_nullity(np.hstack([outer, -inner]), rel)


def partial_indices(F: FrameLoop, *, degree: int | None = None, cutoff: float | None = None) -> IndexProfile:
    """Recover the partial indices of a frame loop.

    Scans D(k) = holomorphic_section_dim(ζ^{−k}·G) from the shift where it
    vanishes downward. At level k the first difference gives
    2·#{κ >= 2k+1} + #{κ = 2k}; when that leaves an odd/even ambiguity a
    Birkhoff kernel count at shift 2k+1 resolves it. The scan stops once
    all N indices are found and D grows by 2N per step.

    Args:
        F: Frame loop.
        degree: Section polynomial degree; sized from the frame by default.
        cutoff: Relative singular-value cutoff.

    Returns:
        The index profile with its dimension certificate.

    Raises:
        UnstableDimensionError: If the dimensions do not stabilize.
        IndexInconsistencyError: If Σκ_j differs from the total index.
    """
    deg = section_degree(F) if degree is None else degree
    total = total_index(F)
    dim = F.N
    max_shift = deg // 2
    dims: dict[int, int] = {}

    def sections(k: int) -> int:
        if abs(k) > max_shift:
            msg = f"Section dimensions did not stabilize within shifts +/-{max_shift}"
            raise UnstableDimensionError(msg)
        if k not in dims:
            dims[k] = holomorphic_section_dim(F.shifted(-k), deg, cutoff=cutoff, check_plateau=k == 0)
            logger.debug("D(%d) = %d", k, dims[k])
        return dims[k]

    top = 0
    while sections(top) > 0:
        top += 1

    counts: dict[int, int] = {}
    odd_dims: dict[int, int] = {}
    above = 0  # indices >= 2·level + 2 found so far
    level = top - 1
    while above < dim:
        remainder = sections(level) - sections(level + 1) - 2 * above
        if remainder < 0:
            msg = f"Section dimensions are not convex at shift {level}"
            raise UnstableDimensionError(msg)
        odd = 0
        if remainder >= 2:
            odd_dims[2 * level + 1] = birkhoff_kernel_dim(F, 2 * level + 1, deg, cutoff=cutoff)
            odd = odd_dims[2 * level + 1] - sections(level + 1) - above
            if odd < 0 or 2 * odd > remainder:
                msg = f"Odd-shift kernel count {odd_dims[2 * level + 1]} inconsistent at shift {level}"
                raise UnstableDimensionError(msg)
        even = remainder - 2 * odd
        if odd:
            counts[2 * level + 1] = odd
        if even:
            counts[2 * level] = even
        above += odd + even
        level -= 1
    if above != dim:
        msg = f"Recovered {above} partial indices for a frame of dimension {dim}"
        raise UnstableDimensionError(msg)
    if sections(level) - sections(level + 1) != 2 * dim:
        msg = f"Section dimensions do not grow linearly below shift {level + 1}"
        raise UnstableDimensionError(msg)

    partial = tuple(sorted((k for k, c in counts.items() for _ in range(c)), reverse=True))
    if sum(partial) != total:
        raise IndexInconsistencyError(sum(partial), total)
    logger.info("Partial indices %s (total %d)", partial, total)
    return IndexProfile(partial=partial, total=total, section_dims=dict(sorted(dims.items())), odd_shift_dims=odd_dims)


def diagonal_loop(grid: BoundaryGrid, powers: Sequence[int]) -> FrameLoop:
    """The loop diag(ζ^{k_1}, …, ζ^{k_N}) with partial indices 2k_j."""
    return FrameLoop(grid, np.einsum("kj,ij->kij", np.power.outer(grid.points, np.asarray(powers)), np.eye(len(powers))))


def half_twist_loop(grid: BoundaryGrid) -> FrameLoop:
    """The 2×2 loop e^{iθ/2}·Rot(θ/2), for which B ≡ ζ·I (indices 1, 1)."""
    z = grid.points
    mats = np.empty((grid.size, 2, 2), dtype=np.complex128)
    mats[:, 0, 0] = mats[:, 1, 1] = (1 + z) / 2
    mats[:, 0, 1] = 1j * (z - 1) / 2
    mats[:, 1, 0] = -1j * (z - 1) / 2
    return FrameLoop(grid, mats)


def block_diagonal(*loops: FrameLoop) -> FrameLoop:
    """Direct sum of loops on the same grid."""
    grid = loops[0].grid
    dim = sum(loop.N for loop in loops)
    mats = np.zeros((grid.size, dim, dim), dtype=np.complex128)
    offset = 0
    for loop in loops:
        mats[:, offset : offset + loop.N, offset : offset + loop.N] = loop.matrices
        offset += loop.N
    return FrameLoop(grid, mats)
