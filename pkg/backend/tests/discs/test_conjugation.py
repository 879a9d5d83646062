"""Tests for harmonic conjugation, holomorphic extension and winding numbers."""

import numpy as np
import pytest

from app.discs.boundary import BoundaryFunction, BoundaryGrid
from app.discs.conjugation import (
    ConjugationKind,
    analytic_projection,
    conjugate,
    holomorphic_extension,
    negative_spectrum_mass,
    negative_spectrum_masses,
    winding_number,
)
from app.discs.errors import HolomorphyError, SampleError, WindingError
from tests.utils.utils import monomial, random_real_loop


class TestConjugate:
    """Tests for the harmonic conjugation operators T₀ and T₁."""

    def test_cosine_and_sine(self, grid: BoundaryGrid) -> None:
        """T₀ maps cos nθ to sin nθ and sin nθ to −cos nθ."""
        cos = BoundaryFunction.from_function(lambda t: np.cos(4 * t), grid)
        sin = BoundaryFunction.from_function(lambda t: np.sin(4 * t), grid)
        assert np.allclose(conjugate(cos, ConjugationKind.AT_CENTER).values, sin.values, atol=1e-13)
        assert np.allclose(conjugate(sin, ConjugationKind.AT_CENTER).values, -cos.values, atol=1e-13)

    def test_random_loop_identities(self, grid: BoundaryGrid, rng: np.random.Generator) -> None:
        """T₀ is an involution up to sign and the mean, T₁ vanishes at ζ = 1, u + iT₀u is holomorphic."""
        for _ in range(100):
            u = random_real_loop(rng, grid, bandwidth=int(rng.integers(1, 65)))
            t0 = conjugate(u, ConjugationKind.AT_CENTER)
            t1 = conjugate(u, ConjugationKind.AT_ONE)
            mean = u.coefficient(0).real
            assert np.allclose(conjugate(t0, ConjugationKind.AT_CENTER).values, -(u.values - mean), atol=1e-12)
            assert abs(t1.values[0, 0]) < 1e-12
            assert abs(np.mean(t0.values)) < 1e-12
            assert negative_spectrum_mass(u + t0 * 1j) < 1e-10

    def test_multicomponent(self, grid: BoundaryGrid, rng: np.random.Generator) -> None:
        """Components are conjugated independently."""
        u = random_real_loop(rng, grid, dim=3)
        stacked = conjugate(u, ConjugationKind.AT_ONE)
        for j in range(3):
            single = conjugate(u.component(j), ConjugationKind.AT_ONE)
            assert np.allclose(stacked.component(j).values, single.values)

    def test_rejects_complex_input(self, grid: BoundaryGrid) -> None:
        """Conjugation requires a function flagged real."""
        with pytest.raises(SampleError, match="real-valued"):
            conjugate(monomial(grid, 1), ConjugationKind.AT_CENTER)


class TestHolomorphy:
    """Tests for spectral masses, projection and interior evaluation."""

    def test_masses(self, grid: BoundaryGrid) -> None:
        """ζ̄ is purely anti-holomorphic; per-component masses separate columns."""
        f = BoundaryFunction.stack([monomial(grid, 2), monomial(grid, -1), BoundaryFunction.constant(0.0, grid)])
        masses = negative_spectrum_masses(f)
        assert masses[0] < 1e-25
        assert masses[1] == pytest.approx(1.0)
        assert masses[2] == 0.0
        assert negative_spectrum_mass(f) == pytest.approx(0.5)

    def test_projection(self, grid: BoundaryGrid) -> None:
        """Projecting cos θ keeps ζ/2."""
        cos = BoundaryFunction.from_function(np.cos, grid)
        assert np.allclose(analytic_projection(cos).values[:, 0], grid.points / 2, atol=1e-14)

    def test_extension_of_polynomial(self, grid: BoundaryGrid) -> None:
        """ζ² + 3 extends to 3.25 at ζ = 0.5."""
        f = monomial(grid, 2) + 3.0
        assert holomorphic_extension(f, 0.5)[0] == pytest.approx(3.25)
        values = holomorphic_extension(f, np.array([0.0, 0.5j]))
        assert values.shape == (2, 1)
        assert values[1, 0] == pytest.approx(2.75)

    def test_extension_rejects_boundary_points(self, grid: BoundaryGrid) -> None:
        """Points on the circle are not interior."""
        with pytest.raises(SampleError, match="Interior evaluation"):
            holomorphic_extension(monomial(grid, 1), 1.0)

    def test_extension_rejects_non_holomorphic(self, grid: BoundaryGrid) -> None:
        """Substantial negative spectrum raises HolomorphyError."""
        with pytest.raises(HolomorphyError):
            holomorphic_extension(monomial(grid, -1), 0.2)


class TestWindingNumber:
    """Tests for winding_number."""

    @pytest.mark.parametrize(("power", "expected"), [(0, 0), (3, 3), (-1, -1)])
    def test_monomials(self, grid: BoundaryGrid, power: int, expected: int) -> None:
        """ζ^k winds k times."""
        assert winding_number(monomial(grid, power, 2.0), 1e-8) == expected

    def test_under_resolved(self, grid: BoundaryGrid) -> None:
        """ζ^100 on 256 points jumps too far between samples."""
        with pytest.raises(WindingError, match="under-resolved"):
            winding_number(monomial(grid, 100), 1e-8)

    def test_vanishing_loop(self, grid: BoundaryGrid) -> None:
        """A loop through the origin is rejected."""
        f = BoundaryFunction.from_function(np.cos, grid)
        with pytest.raises(WindingError, match="nearly vanishes"):
            winding_number(f, 1e-8)

    def test_rejects_vector_loop(self, grid: BoundaryGrid) -> None:
        """Only scalar loops have a winding number."""
        f = BoundaryFunction.stack([monomial(grid, 1), monomial(grid, 1)])
        with pytest.raises(WindingError, match="scalar"):
            winding_number(f, 1e-8)
