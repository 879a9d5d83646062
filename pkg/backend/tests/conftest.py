"""Shared fixtures for the test suite."""

import os
from pathlib import Path

import numpy as np
import pytest

# Set test environment before importing app modules
os.environ["DISCS_ENVIRONMENT"] = "test"

from app.discs.boundary import BoundaryGrid


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator so sweeps are reproducible.

    Returns:
        np.random.Generator: Generator seeded with a fixed value.
    """
    return np.random.default_rng(20240521)


@pytest.fixture(scope="session")
def grid() -> BoundaryGrid:
    """Default 256-point boundary grid.

    Returns:
        BoundaryGrid: The grid.
    """
    return BoundaryGrid(256)


@pytest.fixture(scope="session")
def fine_grid() -> BoundaryGrid:
    """1024-point grid, fine enough for ε = 4 twists.

    Returns:
        BoundaryGrid: The grid.
    """
    return BoundaryGrid(1024)


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    """Directory of the bundled scenario configs.

    Returns:
        Path: ``backend/configs``.
    """
    return Path(__file__).resolve().parents[1] / "configs"
