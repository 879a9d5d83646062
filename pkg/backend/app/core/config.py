"""Numerical settings loaded from environment variables.

Every tolerance used by the library lives here so that acceptance checks
are auditable from one place. Values can be overridden with ``DISCS_*``
environment variables or a ``.env`` file at the project root.
"""

import warnings
from pathlib import Path
from typing import Literal, Self

from pydantic import PositiveFloat, PositiveInt, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Loosest tolerance accepted when running in CI
CI_MAX_TOLERANCE = 1e-6

# backend/app/core/config.py -> repository root
PROJECT_ROOT = Path(__file__).resolve().parents[3]

# Later files win: a .env in the working directory overrides the repository one
ENV_FILES = (PROJECT_ROOT / ".env", Path(".env"))


class Settings(BaseSettings):
    """Solver tolerances and defaults loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=ENV_FILES,
        env_prefix="DISCS_",
        env_ignore_empty=True,
        extra="ignore",
    )
    ENVIRONMENT: Literal["local", "test", "ci"] = "local"
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    DEFAULT_GRID_SIZE: PositiveInt = 256

    SOLVER_TOL: PositiveFloat = 1e-10
    SOLVER_MAX_ITER: PositiveInt = 200
    HOLOMORPHY_TOL: PositiveFloat = 1e-10
    NEARBY_HOLOMORPHY_TOL: PositiveFloat = 1e-9
    RANK_CUTOFF: PositiveFloat = 1e-8
    CENTER_TOL: PositiveFloat = 1e-9
    FRAME_MIN_SINGULAR: PositiveFloat = 1e-8

    FD_STEP: PositiveFloat = 1e-4
    TWIST_EPS: PositiveFloat = 0.4

    @model_validator(mode="after")
    def _check_grid_size(self) -> Self:
        size = self.DEFAULT_GRID_SIZE
        if size < 8 or size & (size - 1):
            msg = f"DEFAULT_GRID_SIZE must be a power of two >= 8, got {size}"
            raise ValueError(msg)
        return self

    def _check_tolerance(self, var_name: str, value: float) -> None:
        """Reject or warn about tolerances too loose for acceptance runs.

        Args:
            var_name: Name of the variable being checked.
            value: The tolerance value.

        Raises:
            ValueError: If the tolerance is too loose in the CI environment.
        """
        if value > CI_MAX_TOLERANCE:
            message = f"{var_name}={value:g} is looser than {CI_MAX_TOLERANCE:g}; acceptance checks may not be meaningful."
            if self.ENVIRONMENT == "ci":
                raise ValueError(message)
            warnings.warn(message, stacklevel=1)

    @model_validator(mode="after")
    def _enforce_tight_tolerances(self) -> Self:
        self._check_tolerance("SOLVER_TOL", self.SOLVER_TOL)
        self._check_tolerance("HOLOMORPHY_TOL", self.HOLOMORPHY_TOL)
        self._check_tolerance("NEARBY_HOLOMORPHY_TOL", self.NEARBY_HOLOMORPHY_TOL)
        self._check_tolerance("CENTER_TOL", self.CENTER_TOL)
        return self


settings = Settings()
