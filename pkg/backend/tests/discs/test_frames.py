"""Tests for frame loops, Θ-frames and partial indices."""

import itertools

import numpy as np
import pytest

from app.discs.boundary import BoundaryGrid
from app.discs.errors import GridError, HolomorphyError, SingularFrameError, WindingError
from app.discs.frames import (
    FrameLoop,
    IndexProfile,
    ThetaFrame,
    b_loop,
    birkhoff_kernel_dim,
    block_diagonal,
    diagonal_loop,
    half_twist_loop,
    holomorphic_section_dim,
    partial_indices,
    section_degree,
    structured_theta,
    total_index,
)


def random_structured_loop(rng: np.random.Generator, grid: BoundaryGrid, powers: tuple[int, ...]) -> FrameLoop:
    """(I + A₀ + A₁ζ)·diag(ζ^k) with small complex A₀, A₁."""
    dim = len(powers)

    def small() -> np.ndarray:
        return rng.uniform(-0.05, 0.05, (dim, dim)) + 1j * rng.uniform(-0.05, 0.05, (dim, dim))

    a0, a1 = small(), small()
    holo = np.eye(dim) + a0 + np.multiply.outer(grid.points, a1)
    return FrameLoop(grid, holo @ diagonal_loop(grid, powers).matrices)


class TestFrameLoop:
    """Tests for FrameLoop construction and transformations."""

    def test_rejects_singular(self, grid: BoundaryGrid) -> None:
        """A vanishing matrix raises SingularFrameError with its angle."""
        mats = np.tile(np.eye(2, dtype=np.complex128), (grid.size, 1, 1))
        mats[5] = 0.0
        with pytest.raises(SingularFrameError) as info:
            FrameLoop(grid, mats)
        assert info.value.angle == pytest.approx(grid.angles[5])

    def test_rejects_bad_shape(self, grid: BoundaryGrid) -> None:
        """Matrices must be square and one per sample."""
        with pytest.raises(GridError):
            FrameLoop(grid, np.ones((grid.size, 2, 3)))

    def test_column_and_determinant(self, grid: BoundaryGrid) -> None:
        """Columns and det of diag(ζ, ζ²)."""
        loop = diagonal_loop(grid, (1, 2))
        assert np.allclose(loop.column(1).values[:, 1], grid.points**2)
        assert np.allclose(loop.determinant().values[:, 0], grid.points**3)
        assert total_index(loop) == 6

    def test_gauge_must_be_real(self, grid: BoundaryGrid) -> None:
        """A complex gauge would change the spanned real subspaces."""
        with pytest.raises(ValueError, match="real"):
            diagonal_loop(grid, (0, 0)).gauged(np.eye(2) * 1j)

    def test_realified(self, grid: BoundaryGrid) -> None:
        """The realification of i·I is the rotation block [[0, −I], [I, 0]]."""
        loop = FrameLoop(grid, np.tile(1j * np.eye(2), (grid.size, 1, 1)))
        real = loop.realified()
        assert real.shape == (grid.size, 4, 4)
        assert np.allclose(real[0, :2, 2:], -np.eye(2))
        assert np.allclose(real[0, 2:, :2], np.eye(2))

    def test_json(self, grid: BoundaryGrid) -> None:
        """Matrices are serialized as row-major re/im pairs."""
        loop = half_twist_loop(grid)
        data = loop.to_json()
        assert data["grid_size"] == grid.size
        assert data["N"] == 2
        assert len(data["matrices"][0]) == 4
        assert np.array_equal(FrameLoop.from_json(data).matrices, loop.matrices)

    def test_b_loop_of_half_twist(self, grid: BoundaryGrid) -> None:
        """B = G·conj(G)⁻¹ is ζ·I for the half twist."""
        b = b_loop(half_twist_loop(grid))
        assert np.allclose(b, grid.points[:, None, None] * np.eye(2), atol=1e-12)


class TestIndexProfile:
    """Tests for IndexProfile validation."""

    def test_rejects_unsorted(self) -> None:
        """Indices are stored in descending order."""
        with pytest.raises(ValueError, match="sorted"):
            IndexProfile(partial=(0, 2), total=2)

    def test_rejects_wrong_total(self) -> None:
        """The total is the sum of the partial indices."""
        with pytest.raises(ValueError, match="differs"):
            IndexProfile(partial=(2, 0), total=4)

    def test_rejects_odd_total(self) -> None:
        """Maslov indices are even."""
        with pytest.raises(ValueError, match="even"):
            IndexProfile(partial=(1, 0), total=1)


class TestSectionDimensions:
    """Tests for holomorphic_section_dim and birkhoff_kernel_dim."""

    @pytest.mark.parametrize("powers", list(itertools.product((0, 1, 2), repeat=2)))
    def test_diagonal_dimension_law(self, grid: BoundaryGrid, powers: tuple[int, int]) -> None:
        """diag(ζ^k) has Σ(2k_j + 1) real sections."""
        assert holomorphic_section_dim(diagonal_loop(grid, powers)) == sum(2 * k + 1 for k in powers)

    def test_three_dimensional_diagonal(self, grid: BoundaryGrid) -> None:
        """The law holds for N = 3 as well."""
        assert holomorphic_section_dim(diagonal_loop(grid, (2, 0, 1))) == 5 + 1 + 3

    def test_negative_index_has_no_sections(self, grid: BoundaryGrid) -> None:
        """κ = −2 contributes nothing."""
        assert holomorphic_section_dim(diagonal_loop(grid, (-1,))) == 0

    def test_birkhoff_kernel_odd_shift(self, grid: BoundaryGrid) -> None:
        """The kernel at shift s counts Σ max(κ − s + 1, 0)."""
        loop = diagonal_loop(grid, (2, 1))
        assert birkhoff_kernel_dim(loop, 3) == 2 + 0
        assert birkhoff_kernel_dim(loop, 1) == 4 + 2

    def test_grid_too_coarse(self) -> None:
        """High powers on a small grid raise GridError."""
        with pytest.raises(GridError, match="does not resolve"):
            section_degree(diagonal_loop(BoundaryGrid(64), (20,)))


class TestPartialIndices:
    """Tests for partial_indices."""

    @pytest.mark.parametrize(
        ("powers", "expected"), [((1, 0), (2, 0)), ((2, 2, 0), (4, 4, 0)), ((0, 3), (6, 0)), ((1, -1), (2, -2))]
    )
    def test_diagonal_loops(self, grid: BoundaryGrid, powers: tuple[int, ...], expected: tuple[int, ...]) -> None:
        """diag(ζ^k) has partial indices 2k sorted descending."""
        profile = partial_indices(diagonal_loop(grid, powers))
        assert profile.partial == expected
        assert profile.total == sum(expected)

    def test_half_twist_has_odd_indices(self, grid: BoundaryGrid) -> None:
        """The half twist needs the odd-shift kernel count to report (1, 1)."""
        profile = partial_indices(half_twist_loop(grid))
        assert profile.partial == (1, 1)
        assert 1 in profile.odd_shift_dims

    def test_block_diagonal(self, grid: BoundaryGrid) -> None:
        """Direct sums concatenate the profiles."""
        loop = block_diagonal(half_twist_loop(grid), diagonal_loop(grid, (1,)))
        assert partial_indices(loop).partial == (2, 1, 1)

    def test_section_certificate(self, grid: BoundaryGrid) -> None:
        """D(k) is recorded per shift."""
        profile = partial_indices(diagonal_loop(grid, (2, 0)))
        assert profile.section_dims[0] == 6
        assert profile.section_dims[1] == 3
        assert profile.section_dims[2] == 1
        assert profile.section_dims[3] == 0

    @pytest.mark.slow
    def test_invariance(self, grid: BoundaryGrid, rng: np.random.Generator) -> None:
        """Real gauge and permutation leave the indices unchanged; ζ·G raises each by 2."""
        for _ in range(25):
            powers = tuple(int(k) for k in rng.integers(0, 3, size=2))
            loop = random_structured_loop(rng, grid, powers)
            expected = tuple(sorted((2 * k for k in powers), reverse=True))
            gauge = rng.normal(size=(2, 2)) + 3 * np.eye(2)
            assert partial_indices(loop).partial == expected
            assert partial_indices(loop.gauged(gauge)).partial == expected
            assert partial_indices(loop.permuted([1, 0])).partial == expected
            assert partial_indices(loop.shifted(1)).partial == tuple(k + 2 for k in expected)


class TestStructuredTheta:
    """Tests for structured_theta and ThetaFrame."""

    def test_divides_out_powers(self, grid: BoundaryGrid) -> None:
        """Dividing ζ out of the first column of diag(2iζ, 3) leaves a constant Θ."""
        loop = FrameLoop(grid, diagonal_loop(grid, (1, 0)).matrices @ np.diag([2j, 3.0]))
        theta = structured_theta(loop, (1, 0))
        assert theta.profile == (2, 0)
        assert np.allclose(theta.center(), np.diag([2j, 3.0]))
        assert np.allclose(theta.loop().matrices, loop.matrices)

    def test_rejects_negative_powers_left(self, grid: BoundaryGrid) -> None:
        """Dividing out too much leaves a non-holomorphic Θ."""
        with pytest.raises(HolomorphyError, match="Theta column 1"):
            structured_theta(diagonal_loop(grid, (1, 0)), (2, 0))

    def test_rejects_winding_determinant(self, grid: BoundaryGrid) -> None:
        """Θ must be invertible on the closed disc."""
        with pytest.raises(WindingError, match="winds"):
            structured_theta(diagonal_loop(grid, (1, 0)), (0, 0))

    def test_rejects_shape_mismatch(self, grid: BoundaryGrid) -> None:
        """ThetaFrame checks its array against the exponents."""
        with pytest.raises(GridError):
            ThetaFrame(grid, np.ones((grid.size, 2, 2), dtype=np.complex128), (0, 0, 0))
