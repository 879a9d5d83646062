"""Tests for boundary grids and boundary functions."""

from pathlib import Path

import numpy as np
import pytest

from app.discs.boundary import (
    BoundaryFunction,
    BoundaryGrid,
    evaluate,
    next_power_of_two,
    read_csv,
    smoothness_report,
    write_csv,
)
from app.discs.errors import GridError, SampleError
from tests.utils.utils import monomial, random_real_loop


class TestBoundaryGrid:
    """Tests for BoundaryGrid."""

    def test_angles_and_points(self) -> None:
        """Angles are 2πk/size and points lie on the unit circle."""
        grid = BoundaryGrid(8)
        assert grid.angles[2] == pytest.approx(np.pi / 2)
        assert np.allclose(np.abs(grid.points), 1.0)
        assert grid.step == pytest.approx(np.pi / 4)

    def test_frequencies_cover_band(self) -> None:
        """Frequencies cover [−size/2, size/2) with the top mode at nyquist_index."""
        grid = BoundaryGrid(16)
        assert sorted(grid.frequencies.tolist()) == list(range(-8, 8))
        assert grid.frequencies[grid.nyquist_index] == -8

    @pytest.mark.parametrize("size", [0, 4, 12, 100])
    def test_rejects_bad_sizes(self, size: int) -> None:
        """Sizes that are not powers of two >= 8 raise GridError."""
        with pytest.raises(GridError, match="power of two"):
            BoundaryGrid(size)

    def test_next_power_of_two(self) -> None:
        """Rounds up and respects the minimum grid size."""
        assert next_power_of_two(1) == 8
        assert next_power_of_two(256) == 256
        assert next_power_of_two(257) == 512


class TestBoundaryFunction:
    """Tests for BoundaryFunction construction and arithmetic."""

    def test_from_samples_one_dimensional(self, grid: BoundaryGrid) -> None:
        """1D samples become a single component; real dtype sets is_real."""
        f = BoundaryFunction.from_samples(np.cos(grid.angles), grid)
        assert f.dim == 1
        assert f.is_real
        assert f.coefficient(1)[0] == pytest.approx(0.5)
        assert f.coefficient(-1)[0] == pytest.approx(0.5)

    def test_rejects_wrong_length(self, grid: BoundaryGrid) -> None:
        """Sample count must match the grid."""
        with pytest.raises(SampleError, match="does not match"):
            BoundaryFunction.from_samples(np.zeros(grid.size + 1), grid)

    def test_rejects_non_finite(self, grid: BoundaryGrid) -> None:
        """NaN samples raise SampleError."""
        samples = np.zeros(grid.size)
        samples[3] = np.nan
        with pytest.raises(SampleError, match="non-finite"):
            BoundaryFunction.from_samples(samples, grid)

    def test_rejects_complex_flagged_real(self, grid: BoundaryGrid) -> None:
        """Complex samples cannot be flagged real."""
        with pytest.raises(SampleError, match="imaginary part"):
            BoundaryFunction.from_samples(grid.points, grid, real=True)

    def test_arrays_are_frozen(self, grid: BoundaryGrid) -> None:
        """Samples cannot be mutated after construction."""
        f = BoundaryFunction.constant(1.0, grid)
        with pytest.raises(ValueError, match="read-only"):
            f.values[0, 0] = 2.0

    def test_coefficient_out_of_band(self, grid: BoundaryGrid) -> None:
        """Frequencies outside the grid band raise GridError."""
        f = BoundaryFunction.constant(1.0, grid)
        with pytest.raises(GridError):
            f.coefficient(grid.size // 2)

    def test_stack_and_component(self, grid: BoundaryGrid) -> None:
        """Stacking concatenates components; component() extracts them again."""
        a = monomial(grid, 1)
        b = BoundaryFunction.constant(2.0, grid)
        stacked = BoundaryFunction.stack([a, b])
        assert stacked.dim == 2
        assert not stacked.is_real
        assert np.allclose(stacked.component(0).values, a.values)
        assert np.allclose(stacked.component(1).values, 2.0)

    def test_stack_rejects_mixed_grids(self, grid: BoundaryGrid) -> None:
        """Functions on different grids cannot be stacked."""
        with pytest.raises(SampleError, match="different grids"):
            BoundaryFunction.stack([BoundaryFunction.constant(1.0, grid), BoundaryFunction.constant(1.0, BoundaryGrid(64))])

    def test_arithmetic(self, grid: BoundaryGrid) -> None:
        """Sums and products act pointwise and keep realness when both operands are real."""
        z = monomial(grid, 1)
        product = z * z.conj()
        assert np.allclose(product.values, 1.0)
        real_sum = BoundaryFunction.constant(1.0, grid) + 2.0
        assert real_sum.is_real
        assert np.allclose(real_sum.values, 3.0)
        assert np.allclose((-z + z).values, 0.0)
        assert not (z * 1j).is_real

    def test_real_and_imag_parts(self, grid: BoundaryGrid) -> None:
        """real_part and imag_part are flagged real."""
        z = monomial(grid, 1)
        assert z.real_part().is_real
        assert np.allclose(z.imag_part().values[:, 0], np.sin(grid.angles))

    def test_derivative(self, grid: BoundaryGrid) -> None:
        """d/dθ of ζ³ is 3iζ³."""
        z3 = monomial(grid, 3)
        assert np.allclose(z3.derivative().values, 3j * z3.values, atol=1e-10)

    def test_resample_up_and_down(self, grid: BoundaryGrid, rng: np.random.Generator) -> None:
        """Band-limited functions survive upsampling then downsampling."""
        u = random_real_loop(rng, grid, bandwidth=20)
        fine = u.resample(BoundaryGrid(1024))
        assert fine.is_real
        assert np.allclose(fine.resample(grid).values, u.values, atol=1e-12)
        assert np.allclose(evaluate(u, fine.grid.angles), fine.values, atol=1e-12)


class TestEvaluate:
    """Tests for trigonometric interpolation."""

    def test_scalar_angle_shape(self, grid: BoundaryGrid) -> None:
        """A scalar angle returns a (d,) vector."""
        f = BoundaryFunction.stack([monomial(grid, 1), monomial(grid, 2)])
        value = evaluate(f, 0.3)
        assert value.shape == (2,)
        assert value[1] == pytest.approx(np.exp(0.6j))

    def test_between_samples(self, grid: BoundaryGrid) -> None:
        """Interpolation is exact for band-limited functions between grid points."""
        f = BoundaryFunction.from_function(lambda t: np.cos(5 * t) + np.sin(2 * t), grid)
        theta = np.array([0.123, 1.5, 4.0])
        assert np.allclose(evaluate(f, theta)[:, 0], np.cos(5 * theta) + np.sin(2 * theta), atol=1e-12)


class TestSmoothnessReport:
    """Tests for smoothness_report."""

    def test_low_frequency_function(self, grid: BoundaryGrid) -> None:
        """A low mode has no tail energy and a second-difference bound near n²."""
        f = BoundaryFunction.from_function(lambda t: np.cos(3 * t), grid)
        report = smoothness_report(f)
        assert report.sup_norm == pytest.approx(1.0)
        assert report.tail_energy < 1e-20
        assert report.difference_quotient_bound == pytest.approx(9.0, rel=1e-3)

    def test_zero_function(self, grid: BoundaryGrid) -> None:
        """The zero function reports zero everywhere."""
        report = smoothness_report(BoundaryFunction.constant(0.0, grid))
        assert report.sup_norm == 0.0
        assert report.tail_energy == 0.0


class TestCsv:
    """Tests for CSV export and import."""

    def test_write_then_read(self, tmp_path: Path, grid: BoundaryGrid) -> None:
        """Samples written with 17 significant digits are read back exactly."""
        f = BoundaryFunction.stack([monomial(grid, 1, 0.1), monomial(grid, 2, -0.3j)])
        path = tmp_path / "disc.csv"
        write_csv(f, path)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "theta,re_1,im_1,re_2,im_2"
        assert np.array_equal(read_csv(path).values, f.values)

    def test_rejects_foreign_csv(self, tmp_path: Path) -> None:
        """Files without the theta header raise SampleError."""
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(SampleError, match="not a boundary-function CSV"):
            read_csv(path)
