"""Harmonic conjugation, holomorphic extension and winding numbers.

Conjugation acts spectrally with multiplier −i·sign(n); the unpaired top
mode −size/2 is zeroed. Two normalizations are provided: T₀ (zero value at
the disc center, i.e. zero mean) and T₁ (zero value at ζ = 1).
"""

from __future__ import annotations

from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np

from app.core.config import settings

from .boundary import BoundaryFunction, BoundaryGrid
from .errors import HolomorphyError, SampleError, WindingError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

# Interior points must satisfy |ζ| <= 1 − BOUNDARY_MARGIN
BOUNDARY_MARGIN = 1e-6


class ConjugationKind(StrEnum):
    """Normalization of the harmonic conjugate."""

    AT_CENTER = "at_center"  # T₀: (T₀u)(0) = 0
    AT_ONE = "at_one"  # T₁: (T₁u)(1) = 0


def _multiplier(grid: BoundaryGrid) -> NDArray[np.complex128]:
    mult = -1j * np.sign(grid.frequencies).astype(np.complex128)
    mult[grid.nyquist_index] = 0.0
    return mult


def conjugate(u: BoundaryFunction, kind: ConjugationKind) -> BoundaryFunction:
    """Harmonic conjugate of a real boundary function.

    Maps a_n cos nθ + b_n sin nθ to a_n sin nθ − b_n cos nθ for n >= 1 and
    fixes the additive constant by ``kind``.

    Args:
        u: Real-valued boundary function (any number of components).
        kind: Normalization.

    Returns:
        The real-valued conjugate.

    Raises:
        SampleError: If u is not flagged real.
    """
    if not u.is_real:
        msg = "Harmonic conjugation requires a real-valued function"
        raise SampleError(msg)
    coeffs = _multiplier(u.grid)[:, np.newaxis] * u.coeffs
    values = (np.fft.ifft(coeffs, axis=0) * u.grid.size).real
    if kind is ConjugationKind.AT_ONE:
        values -= values[0]
    return BoundaryFunction.from_samples(values, u.grid, real=True)


def negative_spectrum_mass(f: BoundaryFunction) -> float:
    """Fraction of spectral energy at negative frequencies.

    Args:
        f: Boundary function (all components pooled).

    Returns:
        Σ_{n<0}|c_n|² / Σ|c_n|², or 0 for the zero function.
    """
    power = np.abs(f.coeffs) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float(power[f.grid.frequencies < 0].sum()) / total


def analytic_projection(f: BoundaryFunction) -> BoundaryFunction:
    """Keep only the frequencies n >= 0.

    Args:
        f: Boundary function.

    Returns:
        The projected (holomorphically extendable) function.
    """
    coeffs = np.where((f.grid.frequencies >= 0)[:, np.newaxis], f.coeffs, 0.0)
    return BoundaryFunction.from_coefficients(coeffs, f.grid)


def holomorphic_extension(f: BoundaryFunction, zeta: ArrayLike, *, threshold: float | None = None) -> NDArray[np.complex128]:
    """Evaluate Σ_{n>=0} c_n ζ^n inside the disc.

    Args:
        f: Boundary trace of a holomorphic map.
        zeta: Interior point or array of points.
        threshold: Largest negative-spectrum mass accepted; defaults to
            ``settings.HOLOMORPHY_TOL``.

    Returns:
        Array of shape (d,) for a scalar point, else (len(zeta), d).

    Raises:
        SampleError: If a point is too close to the boundary.
        HolomorphyError: If f has substantial negative spectrum.
    """
    limit = settings.HOLOMORPHY_TOL if threshold is None else threshold
    points = np.asarray(zeta, dtype=np.complex128)
    if np.any(np.abs(points) > 1.0 - BOUNDARY_MARGIN):
        msg = f"Interior evaluation requires |zeta| <= 1 - {BOUNDARY_MARGIN:g}"
        raise SampleError(msg)
    mass = negative_spectrum_mass(f)
    if mass >= limit:
        raise HolomorphyError(mass, limit)
    half = f.grid.size // 2
    positive = f.coeffs[:half]  # c_0 .. c_{size/2 − 1}
    powers = np.power.outer(points, np.arange(half))
    return powers @ positive


def winding_number(f: BoundaryFunction, tol: float) -> int:
    """Winding number of a nonvanishing scalar loop around the origin.

    Args:
        f: Scalar complex boundary function.
        tol: Lower bound required for min |f|.

    Returns:
        The integer winding number.

    Raises:
        WindingError: If f is not scalar, nearly vanishes, or is
            under-resolved (an argument increment reaches π/2).
    """
    if f.dim != 1:
        msg = f"Winding number needs a scalar loop, got {f.dim} components"
        raise WindingError(msg)
    samples = f.values[:, 0]
    smallest = float(np.min(np.abs(samples)))
    if smallest <= tol:
        msg = f"Loop nearly vanishes: min |f| = {smallest:.3e} <= {tol:.1e}"
        raise WindingError(msg)
    increments = np.angle(np.roll(samples, -1) / samples)
    worst = float(np.max(np.abs(increments)))
    if worst >= np.pi / 2:
        msg = f"Loop under-resolved: argument increment {worst:.3f} >= pi/2"
        raise WindingError(msg)
    return round(float(increments.sum()) / (2.0 * np.pi))


def negative_spectrum_masses(f: BoundaryFunction) -> NDArray[np.float64]:
    """Per-component negative-spectrum masses (0 for vanishing components).

    Args:
        f: Boundary function.

    Returns:
        Array of length d.
    """
    power = np.abs(f.coeffs) ** 2
    totals = power.sum(axis=0)
    negative = power[f.grid.frequencies < 0].sum(axis=0)
    return np.divide(negative, totals, out=np.zeros_like(totals), where=totals > 0)
