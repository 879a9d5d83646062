"""Periodic vector-valued functions on the unit circle.

A ``BoundaryFunction`` stores samples on a uniform power-of-two grid
together with their discrete Fourier coefficients. It is the common
currency of every operator in the package: conjugation, the Bishop
solver, frame loops and twists all consume and produce it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from app.core.config import settings

from .errors import GridError, SampleError

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike, NDArray

MIN_GRID_SIZE = 8

# Largest imaginary part tolerated in samples flagged real (relative to sup norm)
REAL_TOL = 1e-12


def _default_grid_size() -> int:
    return settings.DEFAULT_GRID_SIZE


def next_power_of_two(value: float) -> int:
    """Smallest power of two that is >= value (and >= MIN_GRID_SIZE).

    Args:
        value: Lower bound.

    Returns:
        The power of two.
    """
    return max(MIN_GRID_SIZE, 1 << max(0, math.ceil(math.log2(max(value, 1.0)))))


@dataclass(frozen=True)
class BoundaryGrid:
    """Equispaced angles θ_k = 2πk/size on the unit circle, ζ = e^{iθ}."""

    size: int = field(default_factory=_default_grid_size)

    def __post_init__(self) -> None:
        """Validate grid size.

        Raises:
            GridError: If size is not a power of two or is below the minimum.
        """
        if self.size < MIN_GRID_SIZE or self.size & (self.size - 1):
            msg = f"Grid size must be a power of two >= {MIN_GRID_SIZE}, got {self.size}"
            raise GridError(msg)

    @cached_property
    def angles(self) -> NDArray[np.float64]:
        """Sample angles in [0, 2π)."""
        angles = 2.0 * np.pi * np.arange(self.size) / self.size
        angles.flags.writeable = False
        return angles

    @cached_property
    def points(self) -> NDArray[np.complex128]:
        """Sample points ζ_k on the unit circle."""
        points = np.exp(1j * self.angles)
        points.flags.writeable = False
        return points

    @cached_property
    def frequencies(self) -> NDArray[np.int64]:
        """Integer frequencies in FFT order, covering [−size/2, size/2)."""
        freqs = np.fft.fftfreq(self.size, d=1.0 / self.size).round().astype(np.int64)
        freqs.flags.writeable = False
        return freqs

    @property
    def nyquist_index(self) -> int:
        """Position of the unpaired frequency −size/2 in FFT order."""
        return self.size // 2

    @property
    def step(self) -> float:
        """Angular spacing 2π/size."""
        return 2.0 * np.pi / self.size


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Samples of a map ∂Δ → ℂ^d with their Fourier coefficients.

    Build instances with :meth:`from_samples`; ``values`` has shape
    ``(size, d)`` and ``coeffs`` holds c_n in FFT order so that
    ``values[k] = Σ_n c_n ζ_k^n``.
    """

    grid: BoundaryGrid
    values: NDArray[np.complex128]
    coeffs: NDArray[np.complex128]
    is_real: bool = False

    def __post_init__(self) -> None:
        """Validate array shapes and freeze the arrays.

        Raises:
            SampleError: If values and coeffs do not match the grid.
        """
        expected = (self.grid.size, self.values.shape[-1] if self.values.ndim == 2 else 0)
        if self.values.ndim != 2 or self.values.shape != expected or self.coeffs.shape != expected:
            msg = f"Expected arrays of shape (size, d) for grid size {self.grid.size}, got {self.values.shape}"
            raise SampleError(msg)
        self.values.flags.writeable = False
        self.coeffs.flags.writeable = False

    @classmethod
    def from_samples(cls, samples: ArrayLike, grid: BoundaryGrid, *, real: bool | None = None) -> BoundaryFunction:
        """Build a boundary function from samples at the grid angles.

        Args:
            samples: Array of shape (size,) or (size, d).
            grid: Sample grid.
            real: Flag the function as real-valued. Defaults to True for
                real dtype input.

        Returns:
            The boundary function with its Fourier coefficients.

        Raises:
            SampleError: On a length mismatch, non-finite entries, or
                non-real samples flagged real.
        """
        arr = np.asarray(samples)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        if arr.ndim != 2 or arr.shape[1] == 0:
            msg = f"Samples must have shape (size,) or (size, d), got {arr.shape}"
            raise SampleError(msg)
        if arr.shape[0] != grid.size:
            msg = f"Sample count {arr.shape[0]} does not match grid size {grid.size}"
            raise SampleError(msg)
        if not np.all(np.isfinite(arr)):
            msg = "Samples contain non-finite entries"
            raise SampleError(msg)
        if real is None:
            real = not np.iscomplexobj(arr)
        values = np.array(arr, dtype=np.complex128)
        if real:
            scale = max(1.0, float(np.max(np.abs(values))))
            worst = float(np.max(np.abs(values.imag)))
            if worst > REAL_TOL * scale:
                msg = f"Samples flagged real have imaginary part up to {worst:.3e}"
                raise SampleError(msg)
            values.imag = 0.0
        coeffs = np.fft.fft(values, axis=0) / grid.size
        return cls(grid=grid, values=values, coeffs=coeffs, is_real=real)

    @classmethod
    def from_coefficients(cls, coeffs: ArrayLike, grid: BoundaryGrid, *, real: bool = False) -> BoundaryFunction:
        """Build a boundary function from Fourier coefficients in FFT order.

        Args:
            coeffs: Array of shape (size,) or (size, d).
            grid: Sample grid.
            real: Flag the result real-valued (imaginary roundoff is dropped).

        Returns:
            The boundary function.
        """
        arr = np.asarray(coeffs, dtype=np.complex128)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        values = np.fft.ifft(arr, axis=0) * grid.size
        if real:
            values = values.real
        return cls.from_samples(values, grid, real=real)

    @classmethod
    def from_function(
        cls, fn: Callable[[NDArray[np.float64]], ArrayLike], grid: BoundaryGrid, *, real: bool | None = None
    ) -> BoundaryFunction:
        """Sample a function of θ on the grid.

        Args:
            fn: Vectorized function of the angle array.
            grid: Sample grid.
            real: Real flag, inferred from dtype by default.

        Returns:
            The sampled boundary function.
        """
        return cls.from_samples(fn(np.asarray(grid.angles)), grid, real=real)

    @classmethod
    def constant(cls, value: ArrayLike, grid: BoundaryGrid) -> BoundaryFunction:
        """Constant function with the given vector value.

        Args:
            value: Scalar or vector value.
            grid: Sample grid.

        Returns:
            The constant boundary function.
        """
        vec = np.atleast_1d(np.asarray(value))
        return cls.from_samples(np.tile(vec, (grid.size, 1)), grid)

    @classmethod
    def stack(cls, functions: Sequence[BoundaryFunction]) -> BoundaryFunction:
        """Concatenate components of functions sampled on the same grid.

        Args:
            functions: Functions to stack, in component order.

        Returns:
            A function whose components are those of the inputs.

        Raises:
            SampleError: If the grids differ or nothing is given.
        """
        if not functions:
            msg = "Cannot stack an empty sequence"
            raise SampleError(msg)
        grid = functions[0].grid
        if any(f.grid != grid for f in functions):
            msg = "Cannot stack functions sampled on different grids"
            raise SampleError(msg)
        values = np.concatenate([f.values for f in functions], axis=1)
        return cls.from_samples(values, grid, real=all(f.is_real for f in functions))

    @property
    def dim(self) -> int:
        """Number of components d."""
        return self.values.shape[1]

    def coefficient(self, n: int) -> NDArray[np.complex128]:
        """Fourier coefficient vector c_n for n in [−size/2, size/2).

        Args:
            n: Frequency.

        Returns:
            The coefficient vector.

        Raises:
            GridError: If n is outside the grid bandwidth.
        """
        half = self.grid.size // 2
        if not -half <= n < half:
            msg = f"Frequency {n} outside [{-half}, {half})"
            raise GridError(msg)
        return self.coeffs[n % self.grid.size]

    def component(self, j: int) -> BoundaryFunction:
        """The scalar function of component j."""
        return BoundaryFunction.from_samples(self.values[:, j], self.grid, real=self.is_real)

    def real_part(self) -> BoundaryFunction:
        """Real part, flagged real."""
        return BoundaryFunction.from_samples(self.values.real, self.grid, real=True)

    def imag_part(self) -> BoundaryFunction:
        """Imaginary part, flagged real."""
        return BoundaryFunction.from_samples(self.values.imag, self.grid, real=True)

    def conj(self) -> BoundaryFunction:
        """Complex conjugate."""
        return BoundaryFunction.from_samples(self.values.conj(), self.grid, real=self.is_real)

    def derivative(self) -> BoundaryFunction:
        """Spectral derivative d/dθ; the unpaired top mode is dropped.

        Returns:
            The derivative, real when self is real.
        """
        multiplier = 1j * self.grid.frequencies.astype(np.float64)
        multiplier[self.grid.nyquist_index] = 0.0
        return BoundaryFunction.from_coefficients(multiplier[:, np.newaxis] * self.coeffs, self.grid, real=self.is_real)

    def resample(self, grid: BoundaryGrid) -> BoundaryFunction:
        """Trigonometric interpolation onto another grid.

        Upsampling splits the unpaired top mode symmetrically; downsampling
        truncates to the new bandwidth.

        Args:
            grid: Target grid.

        Returns:
            The resampled function.
        """
        if grid == self.grid:
            return self
        old_n = self.grid.frequencies
        new_coeffs = np.zeros((grid.size, self.dim), dtype=np.complex128)
        if grid.size > self.grid.size:
            paired = old_n != -(self.grid.size // 2)
            new_coeffs[old_n[paired] % grid.size] = self.coeffs[paired]
            top = self.coeffs[self.grid.nyquist_index]
            new_coeffs[self.grid.size // 2] += top / 2
            new_coeffs[-(self.grid.size // 2) % grid.size] += top / 2
        else:
            half = grid.size // 2
            kept = (old_n >= -half) & (old_n < half)
            new_coeffs[old_n[kept] % grid.size] = self.coeffs[kept]
        return BoundaryFunction.from_coefficients(new_coeffs, grid, real=self.is_real)

    def _operand(self, other: BoundaryFunction | complex | NDArray) -> tuple[NDArray, bool]:
        if isinstance(other, BoundaryFunction):
            if other.grid != self.grid:
                msg = "Operands are sampled on different grids"
                raise SampleError(msg)
            return other.values, other.is_real
        arr = np.asarray(other)
        return arr, not np.iscomplexobj(arr)

    def __add__(self, other: BoundaryFunction | complex | NDArray) -> BoundaryFunction:
        """Pointwise sum."""
        values, real = self._operand(other)
        return BoundaryFunction.from_samples(self.values + values, self.grid, real=self.is_real and real)

    def __sub__(self, other: BoundaryFunction | complex | NDArray) -> BoundaryFunction:
        """Pointwise difference."""
        values, real = self._operand(other)
        return BoundaryFunction.from_samples(self.values - values, self.grid, real=self.is_real and real)

    def __mul__(self, other: BoundaryFunction | complex | NDArray) -> BoundaryFunction:
        """Pointwise product; a scalar function multiplies every component."""
        values, real = self._operand(other)
        return BoundaryFunction.from_samples(self.values * values, self.grid, real=self.is_real and real)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self) -> BoundaryFunction:
        """Pointwise negation."""
        return BoundaryFunction.from_samples(-self.values, self.grid, real=self.is_real)


@dataclass(frozen=True)
class SmoothnessReport:
    """Grid proxies for the size and regularity of a boundary function."""

    sup_norm: float
    tail_energy: float  # spectral mass fraction with |n| >= 3·size/8
    difference_quotient_bound: float  # max |second difference| / h²


def evaluate(f: BoundaryFunction, theta: ArrayLike) -> NDArray[np.complex128]:
    """Trigonometric interpolation of f at arbitrary angles.

    The unpaired top mode is evaluated as a cosine so that real-valued
    functions interpolate to real values.

    Args:
        f: Boundary function.
        theta: Scalar angle or array of angles (wrapped mod 2π).

    Returns:
        Array of shape (d,) for a scalar angle, else (len(theta), d).
    """
    theta_arr = np.mod(np.asarray(theta, dtype=np.float64), 2.0 * np.pi)
    freqs = f.grid.frequencies.astype(np.float64)
    phases = np.exp(1j * np.multiply.outer(theta_arr, freqs))
    phases[..., f.grid.nyquist_index] = np.cos(0.5 * f.grid.size * theta_arr)
    return phases @ f.coeffs


def smoothness_report(f: BoundaryFunction) -> SmoothnessReport:
    """Sup norm, spectral tail and second-difference bound of f.

    Args:
        f: Boundary function.

    Returns:
        The report.
    """
    size = f.grid.size
    power = np.abs(f.coeffs) ** 2
    total = float(power.sum())
    tail_mask = np.abs(f.grid.frequencies) >= 3 * size // 8
    tail = float(power[tail_mask].sum()) / total if total > 0 else 0.0
    second = np.roll(f.values, -1, axis=0) - 2.0 * f.values + np.roll(f.values, 1, axis=0)
    return SmoothnessReport(
        sup_norm=float(np.max(np.abs(f.values))),
        tail_energy=min(tail, 1.0),
        difference_quotient_bound=float(np.max(np.abs(second))) / f.grid.step**2,
    )


def write_csv(f: BoundaryFunction, path: Path) -> None:
    """Write samples as CSV: θ, re_1, im_1, …, re_d, im_d.

    Args:
        f: Boundary function.
        path: Destination file.
    """
    header = ["theta"] + [name for j in range(1, f.dim + 1) for name in (f"re_{j}", f"im_{j}")]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for theta, row in zip(f.grid.angles, f.values, strict=True):
            cells = [format(theta, ".17g")]
            for value in row:
                cells.extend((format(value.real, ".17g"), format(value.imag, ".17g")))
            writer.writerow(cells)


def read_csv(path: Path, *, real: bool = False) -> BoundaryFunction:
    """Read samples written by :func:`write_csv`.

    Args:
        path: Source file.
        real: Flag the result real-valued.

    Returns:
        The boundary function.

    Raises:
        SampleError: If the header or angle column is malformed.
    """
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0][0] != "theta" or len(rows[0]) % 2 != 1:
        msg = f"{path} is not a boundary-function CSV"
        raise SampleError(msg)
    data = np.array([[float(cell) for cell in row] for row in rows[1:]], dtype=np.float64)
    grid = BoundaryGrid(size=data.shape[0])
    if not np.allclose(data[:, 0], grid.angles, rtol=0.0, atol=1e-12):
        msg = f"{path} angles do not form a uniform grid"
        raise SampleError(msg)
    values = data[:, 1::2] + 1j * data[:, 2::2]
    return BoundaryFunction.from_samples(values, grid, real=real)
