import numpy as np

from app.discs.boundary import BoundaryFunction, BoundaryGrid


def random_real_loop(
    rng: np.random.Generator, grid: BoundaryGrid, *, bandwidth: int = 16, dim: int = 1, scale: float = 1.0
) -> BoundaryFunction:
    """Random real trigonometric polynomial with |n| <= bandwidth."""
    coeffs = np.zeros((grid.size, dim), dtype=np.complex128)
    for n in range(bandwidth + 1):
        c = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        if n == 0:
            coeffs[0] = c.real
        else:
            coeffs[n] = c / (2 * n)
            coeffs[-n] = np.conj(c) / (2 * n)
    return BoundaryFunction.from_coefficients(coeffs * scale, grid, real=True)


def monomial(grid: BoundaryGrid, power: int, factor: complex = 1.0) -> BoundaryFunction:
    """Scalar loop factor·ζ^power."""
    return BoundaryFunction.from_samples(factor * grid.points**power, grid, real=False)
