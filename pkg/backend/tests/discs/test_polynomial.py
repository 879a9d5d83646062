"""Tests for exact polynomial maps."""

import numpy as np
import pytest

from app.discs.polynomial import PolynomialMap


@pytest.fixture
def quadric() -> PolynomialMap:
    """p(x, y) = (x² + xy, 3y²).

    Returns:
        PolynomialMap: Two components in two variables.
    """
    return PolynomialMap.from_terms(2, 2, [(0, 1.0, (2, 0)), (0, 1.0, (1, 1)), (1, 3.0, (0, 2))])


class TestPolynomialMap:
    """Tests for PolynomialMap."""

    def test_evaluate(self, quadric: PolynomialMap) -> None:
        """Evaluation broadcasts over leading axes."""
        points = np.array([[1.0, 2.0], [0.5, -1.0]])
        assert np.allclose(quadric(points), [[3.0, 12.0], [-0.25, 3.0]])
        assert quadric.degree == 2
        assert quadric.min_degree == 2

    def test_repeated_terms_merge(self) -> None:
        """Repeated monomials are summed and cancellations drop the term."""
        p = PolynomialMap.from_terms(1, 1, [(0, 2.0, (3,)), (0, -2.0, (3,)), (0, 1.0, (2,))])
        assert list(p.coefficients) == [(2,)]

    def test_zero_map(self) -> None:
        """The zero map has no terms, degree 0 and no minimum degree."""
        zero = PolynomialMap.zero(3, 2)
        assert zero.is_zero
        assert zero.degree == 0
        assert zero.min_degree is None
        assert np.array_equal(zero(np.ones(3)), np.zeros(2))

    @pytest.mark.parametrize(
        ("terms", "match"),
        [([(2, 1.0, (1, 0))], "out of range"), ([(0, 1.0, (1,))], "exponents"), ([(0, 1.0, (-1, 2))], "negative")],
    )
    def test_invalid_terms(self, terms: list, match: str) -> None:
        """Bad components or exponents raise ValueError."""
        with pytest.raises(ValueError, match=match):
            PolynomialMap.from_terms(2, 2, terms)

    def test_partial_and_jacobian(self, quadric: PolynomialMap) -> None:
        """Derivatives are exact."""
        assert np.allclose(quadric.jacobian([1.0, 2.0]), [[4.0, 1.0], [0.0, 12.0]])
        assert quadric.partial(1).partial(1)(np.zeros(2)).tolist() == [0.0, 6.0]

    def test_translate(self, quadric: PolynomialMap) -> None:
        """Translation expands p(x + c) exactly."""
        shift = np.array([0.5, -1.5])
        moved = quadric.translate(shift)
        points = np.array([[0.3, 0.7], [-2.0, 1.0]])
        assert np.allclose(moved(points), quadric(points + shift))
        assert moved.min_degree == 0

    def test_truncated_and_embedded(self, quadric: PolynomialMap) -> None:
        """Truncation filters degrees; embedding re-indexes variables."""
        moved = quadric.translate([1.0, 1.0])
        assert moved.truncated(2).max_coefficient_difference(quadric) == 0.0
        assert moved.truncated(0, 1).degree == 1
        wide = quadric.embedded(4, offset=1)
        assert np.allclose(wide([9.0, 1.0, 2.0, 9.0]), quadric([1.0, 2.0]))

    def test_arithmetic(self, quadric: PolynomialMap) -> None:
        """Sum, difference and scaling act on coefficients."""
        assert (quadric - quadric).is_zero
        assert (quadric + quadric).max_coefficient_difference(quadric.scaled(2.0)) == 0.0
        assert quadric.max_coefficient_difference(PolynomialMap.zero(2, 2)) == 3.0
        with pytest.raises(ValueError, match="Incompatible"):
            _ = quadric + PolynomialMap.zero(3, 2)

    def test_json(self, quadric: PolynomialMap) -> None:
        """JSON terms are sorted and rebuild the same map."""
        data = quadric.to_json()
        assert data[0] == {"coeff": 3.0, "powers": [0, 2], "component": 1}
        rebuilt = PolynomialMap.from_json(2, 2, data)
        assert rebuilt.max_coefficient_difference(quadric) == 0.0

    def test_json_component_defaults_to_first(self) -> None:
        """Terms without a component key belong to component 0."""
        terms = [{"coeff": 1.0, "powers": [2, 0, 0]}, {"coeff": 2.0, "powers": [0, 0, 2], "component": 1}]
        p = PolynomialMap.from_json(3, 2, terms)
        assert np.allclose(p([1.0, 0.0, 1.0]), [1.0, 2.0])
        assert p.to_json()[0]["component"] == 1

    def test_hessian(self, quadric: PolynomialMap) -> None:
        """Second derivatives are exact and symmetric."""
        hess = quadric.hessian([0.3, -0.2])
        assert hess.shape == (2, 2, 2)
        assert np.allclose(hess[0], [[2.0, 1.0], [1.0, 0.0]])
        assert np.allclose(hess[1], [[0.0, 0.0], [0.0, 6.0]])
