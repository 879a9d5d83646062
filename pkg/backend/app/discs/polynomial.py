"""Exact real polynomial maps ℝ^nvars → ℝ^ncomp.

Used for the graphing functions of CR manifolds and for the defining
functions of glued maximally real families, where Taylor tails must be
computed exactly rather than approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from numpy.typing import ArrayLike, NDArray

Monomial = tuple[int, ...]


def _merge(
    nvars: int, ncomp: int, items: Iterable[tuple[Monomial, NDArray[np.float64]]]
) -> dict[Monomial, NDArray[np.float64]]:
    merged: dict[Monomial, NDArray[np.float64]] = {}
    for powers, coeff in items:
        if len(powers) != nvars:
            msg = f"Monomial {powers} does not have {nvars} exponents"
            raise ValueError(msg)
        if any(p < 0 for p in powers):
            msg = f"Monomial {powers} has a negative exponent"
            raise ValueError(msg)
        acc = merged.setdefault(powers, np.zeros(ncomp))
        acc += coeff
    return {powers: coeff for powers, coeff in merged.items() if np.any(coeff != 0.0)}


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Polynomial map stored as monomial → coefficient vector."""

    nvars: int
    ncomp: int
    coefficients: Mapping[Monomial, NDArray[np.float64]]

    @classmethod
    def from_terms(cls, nvars: int, ncomp: int, terms: Iterable[tuple[int, float, Iterable[int]]]) -> PolynomialMap:
        """Build from (component, coefficient, powers) triples.

        Args:
            nvars: Number of variables.
            ncomp: Number of components.
            terms: Triples; repeated monomials are summed.

        Returns:
            The polynomial map.

        Raises:
            ValueError: If a component index is out of range.
        """
        items = []
        for component, coeff, powers in terms:
            if not 0 <= component < ncomp:
                msg = f"Component {component} out of range for {ncomp} components"
                raise ValueError(msg)
            vec = np.zeros(ncomp)
            vec[component] = coeff
            items.append((tuple(int(p) for p in powers), vec))
        return cls(nvars, ncomp, _merge(nvars, ncomp, items))

    @classmethod
    def zero(cls, nvars: int, ncomp: int) -> PolynomialMap:
        """The zero map."""
        return cls(nvars, ncomp, {})

    @classmethod
    def from_json(cls, nvars: int, ncomp: int, data: Iterable[Mapping[str, Any]]) -> PolynomialMap:
        """Build from a list of ``{"coeff", "powers", "component"}`` objects; component defaults to 0."""
        return cls.from_terms(nvars, ncomp, ((int(t.get("component", 0)), float(t["coeff"]), t["powers"]) for t in data))

    def to_json(self) -> list[dict[str, Any]]:
        """Serialize as a sorted list of ``{"coeff", "powers", "component"}`` objects."""
        return [
            {"coeff": float(coeff[j]), "powers": list(powers), "component": j}
            for powers, coeff in sorted(self.coefficients.items())
            for j in range(self.ncomp)
            if coeff[j] != 0.0
        ]

    @property
    def degree(self) -> int:
        """Total degree (0 for the zero map)."""
        return max((sum(p) for p in self.coefficients), default=0)

    @property
    def min_degree(self) -> int | None:
        """Lowest total degree of a nonzero term, None for the zero map."""
        return min((sum(p) for p in self.coefficients), default=None)

    @property
    def is_zero(self) -> bool:
        """True when every coefficient vanishes."""
        return not self.coefficients

    def __call__(self, points: ArrayLike) -> NDArray[np.float64]:
        """Evaluate at points of shape (..., nvars).

        Returns:
            Array of shape (..., ncomp).
        """
        x = np.asarray(points, dtype=np.float64)
        out = np.zeros((*x.shape[:-1], self.ncomp))
        for powers, coeff in self.coefficients.items():
            out += np.prod(x ** np.asarray(powers), axis=-1)[..., np.newaxis] * coeff
        return out

    def partial(self, var: int) -> PolynomialMap:
        """Exact partial derivative with respect to variable ``var``."""
        items = []
        for powers, coeff in self.coefficients.items():
            if powers[var] == 0:
                continue
            lowered = list(powers)
            lowered[var] -= 1
            items.append((tuple(lowered), coeff * powers[var]))
        return PolynomialMap(self.nvars, self.ncomp, _merge(self.nvars, self.ncomp, items))

    def jacobian(self, point: ArrayLike) -> NDArray[np.float64]:
        """Jacobian matrix of shape (ncomp, nvars) at a single point."""
        x = np.asarray(point, dtype=np.float64)
        return np.stack([self.partial(v)(x) for v in range(self.nvars)], axis=-1)

    def hessian(self, point: ArrayLike) -> NDArray[np.float64]:
        """Second derivatives of shape (ncomp, nvars, nvars) at a single point."""
        x = np.asarray(point, dtype=np.float64)
        firsts = [self.partial(v) for v in range(self.nvars)]
        return np.stack([np.stack([d.partial(w)(x) for w in range(self.nvars)], axis=-1) for d in firsts], axis=-2)

    def translate(self, shift: ArrayLike) -> PolynomialMap:
        """The polynomial x ↦ p(x + shift), expanded exactly.

        Args:
            shift: Vector of length nvars.

        Returns:
            The translated polynomial.
        """
        c = np.asarray(shift, dtype=np.float64)
        items = []
        for powers, coeff in self.coefficients.items():
            for lower in product(*(range(p + 1) for p in powers)):
                weight = 1.0
                for p, q, ci in zip(powers, lower, c, strict=True):
                    weight *= math.comb(p, q) * ci ** (p - q)
                if weight != 0.0:
                    items.append((tuple(lower), coeff * weight))
        return PolynomialMap(self.nvars, self.ncomp, _merge(self.nvars, self.ncomp, items))

    def truncated(self, min_degree: int = 0, max_degree: int | None = None) -> PolynomialMap:
        """Keep the terms whose total degree lies in [min_degree, max_degree]."""
        top = self.degree if max_degree is None else max_degree
        kept = {p: c for p, c in self.coefficients.items() if min_degree <= sum(p) <= top}
        return PolynomialMap(self.nvars, self.ncomp, kept)

    def embedded(self, nvars: int, offset: int = 0) -> PolynomialMap:
        """Re-index into a larger variable space starting at ``offset``."""
        items = []
        for powers, coeff in self.coefficients.items():
            full = [0] * nvars
            full[offset : offset + self.nvars] = powers
            items.append((tuple(full), coeff))
        return PolynomialMap(nvars, self.ncomp, _merge(nvars, self.ncomp, items))

    def scaled(self, factor: float) -> PolynomialMap:
        """Multiply every coefficient by a scalar."""
        return PolynomialMap(
            self.nvars, self.ncomp, _merge(self.nvars, self.ncomp, ((p, c * factor) for p, c in self.coefficients.items()))
        )

    def __add__(self, other: PolynomialMap) -> PolynomialMap:
        """Coefficientwise sum."""
        self._check_compatible(other)
        items = [*self.coefficients.items(), *other.coefficients.items()]
        return PolynomialMap(self.nvars, self.ncomp, _merge(self.nvars, self.ncomp, items))

    def __sub__(self, other: PolynomialMap) -> PolynomialMap:
        """Coefficientwise difference."""
        return self + other.scaled(-1.0)

    def max_coefficient_difference(self, other: PolynomialMap) -> float:
        """Largest absolute coefficient difference to another map."""
        diff = self - other
        return max((float(np.max(np.abs(c))) for c in diff.coefficients.values()), default=0.0)

    def _check_compatible(self, other: PolynomialMap) -> None:
        if (self.nvars, self.ncomp) != (other.nvars, other.ncomp):
            msg = f"Incompatible shapes ({self.nvars}, {self.ncomp}) and ({other.nvars}, {other.ncomp})"
            raise ValueError(msg)
