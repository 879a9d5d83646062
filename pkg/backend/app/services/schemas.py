"""Pydantic schemas for scenario configuration files.

Domain objects in ``app.discs`` stay framework-free; these models validate
JSON configs and convert them into domain objects.
"""

from enum import StrEnum
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt, model_validator

from app.core.config import settings
from app.discs.bishop import GraphManifold
from app.discs.boundary import MIN_GRID_SIZE
from app.discs.twist import twist_grid_size

class TargetKind(StrEnum):
    """Attachment target of the nearby discs."""

    MANIFOLD = "manifold"
    LINEAR = "linear"


class StrictModel(BaseModel):
    """Base model rejecting unknown keys."""

    model_config = ConfigDict(extra="forbid")


class Tolerances(StrictModel):
    """Numerical tolerances applied for the duration of a scenario."""

    solver: PositiveFloat = 1e-10
    holomorphy: PositiveFloat = 1e-10
    rank_cutoff: PositiveFloat = 1e-8
    center: PositiveFloat = 1e-9


class TermConfig(StrictModel):
    """One monomial of the graphing function h over (Re w, Im w, y)."""

    coeff: float
    powers: list[NonNegativeInt]
    component: NonNegativeInt = 0


class ManifoldConfig(StrictModel):
    """Graphed CR manifold x = h(w, y) in ℂ^{m+n}."""

    m: PositiveInt = 1
    n: PositiveInt = 1
    terms: list[TermConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_manifold(self) -> Self:
        """Build the manifold once so invalid polynomials fail validation.

        Returns:
            Self: The validated config.
        """
        self.build()
        return self

    def build(self) -> GraphManifold:
        """Convert to a domain manifold."""
        return GraphManifold.from_json(self.model_dump())


class ScenarioConfig(StrictModel):
    """Fields shared by every scenario."""

    grid_size: PositiveInt | None = None
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @model_validator(mode="after")
    def check_grid_size(self) -> Self:
        """Require a power-of-two grid.

        Returns:
            Self: The validated config.

        Raises:
            ValueError: If grid_size is not a power of two >= 8.
        """
        size = self.grid_size
        if size is not None and (size < MIN_GRID_SIZE or size & (size - 1)):
            msg = f"grid_size must be a power of two >= {MIN_GRID_SIZE}, got {size}"
            raise ValueError(msg)
        return self


class BishopSolveConfig(ScenarioConfig):
    """Solve for A_{ρ,s,v}; s and v default to zero."""

    manifold: ManifoldConfig = Field(default_factory=ManifoldConfig)
    rho: float = Field(default=0.1, ge=0.0)
    s: list[float] | None = None
    v: list[float] | None = None

    @model_validator(mode="after")
    def check_lengths(self) -> Self:
        """Match s and v to the manifold dimensions.

        Returns:
            Self: The validated config.

        Raises:
            ValueError: If s or v have the wrong length.
        """
        m, n = self.manifold.m, self.manifold.n
        if self.s is not None and len(self.s) != 2 * m + n - 1:
            msg = f"s must have {2 * m + n - 1} entries"
            raise ValueError(msg)
        if self.v is not None and len(self.v) != n - 1:
            msg = f"v must have {n - 1} entries"
            raise ValueError(msg)
        return self


class ReferenceDiscConfig(ScenarioConfig):
    """Reference disc with W = (ρ₀ − ρ₀ζ, 0, …, 0)."""

    manifold: ManifoldConfig = Field(default_factory=ManifoldConfig)
    rho0: PositiveFloat = 0.1


class R1IndicesConfig(ReferenceDiscConfig):
    """Partial indices of the R₁ frame along the reference disc."""


class TwistConfig(ReferenceDiscConfig):
    """Adds twist orders; ells default to (1, 2, …, 2), which gives (4, …, 4)."""

    ells: list[NonNegativeInt] | None = None
    eps: PositiveFloat = Field(default_factory=lambda: settings.TWIST_EPS)

    @model_validator(mode="after")
    def check_ells(self) -> Self:
        """Match the number of twist orders to N.

        Returns:
            Self: The validated config.

        Raises:
            ValueError: If ells has the wrong length.
        """
        dim = self.manifold.m + self.manifold.n
        if self.ells is not None and len(self.ells) != dim:
            msg = f"ells must have {dim} entries (one per column)"
            raise ValueError(msg)
        return self

    def twist_orders(self) -> tuple[int, ...]:
        """The configured ells or the default (1, 2, …, 2)."""
        if self.ells is not None:
            return tuple(self.ells)
        return (1,) + (2,) * (self.manifold.m + self.manifold.n - 1)

    def required_grid_size(self, default: int) -> int:
        """Largest of the configured grid and what every twist needs."""
        base = self.grid_size or default
        return max(base, *(twist_grid_size(ell, self.eps) for ell in self.twist_orders()))


class TwistIndicesConfig(TwistConfig):
    """Partial indices of the twisted R₁ frame."""


class GlobevnikFamilyConfig(TwistConfig):
    """Parameter-count law for the attached family; ells default to zero (no twist)."""

    target: TargetKind = TargetKind.MANIFOLD

    def twist_orders(self) -> tuple[int, ...]:
        """The configured ells or no twist."""
        if self.ells is not None:
            return tuple(self.ells)
        return (0,) * (self.manifold.m + self.manifold.n)


class Step4Config(TwistConfig):
    """Step-4 family checks: fixed center, leading terms, foliation, normal rank."""

    target: TargetKind = TargetKind.MANIFOLD
    rho: PositiveFloat = 0.1
    rho_eps: PositiveFloat = 0.05
    sweep_radius: PositiveFloat = 0.01
    sweep_points: int = Field(default=5, ge=2)

    @model_validator(mode="after")
    def check_step4_profile(self) -> Self:
        """Require twisted indices of at least 4 in every column.

        Returns:
            Self: The validated config.

        Raises:
            ValueError: If some twisted partial index would be below 4.
        """
        ells = self.twist_orders()
        if not ells or ells[0] < 1 or any(ell < 2 for ell in ells[1:]):
            msg = f"Step-4 families need ells[0] >= 1 and the others >= 2, got {list(ells)}"
            raise ValueError(msg)
        return self


class Step4VerifyConfig(Step4Config):
    """Step-4 checks run independently of each other."""


class FullPipelineConfig(Step4Config):
    """All stages chained; the first failing stage stops the run."""
