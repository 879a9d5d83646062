"""Shared fixtures for the numerical core tests."""

import pytest

from app.discs.bishop import AnalyticDisc, GraphManifold, build_R1_frame, build_R1_hessian, reference_disc
from app.discs.boundary import BoundaryGrid
from app.discs.frames import FrameLoop, ThetaFrame, structured_theta
from app.discs.globevnik import AttachmentTarget, Step4Family, manifold_target
from app.discs.twist import twist_theta

RHO0 = 0.1
STEP4_EPS = 4.0
STEP4_ELLS = (1, 2)


@pytest.fixture(scope="session")
def quadric() -> GraphManifold:
    """The hypersurface x = |w|² in ℂ².

    Returns:
        GraphManifold: m = n = 1.
    """
    return GraphManifold.from_terms(1, 1, [(0, 1.0, (2, 0, 0)), (0, 1.0, (0, 2, 0))])


@pytest.fixture(scope="session")
def flat_base(fine_grid: BoundaryGrid) -> tuple[AnalyticDisc, FrameLoop]:
    """Reference disc and R₁ frame of the flat manifold in ℂ² on the fine grid.

    Returns:
        tuple[AnalyticDisc, FrameLoop]: Disc and its R₁ frame, indices (2, 0).
    """
    M = GraphManifold.flat(1, 1)
    disc = reference_disc(M, RHO0, fine_grid)
    return disc, build_R1_frame(M, disc)


@pytest.fixture(scope="session")
def step4_family(flat_base: tuple[AnalyticDisc, FrameLoop]) -> Step4Family:
    """Step-4 family over the flat linear target with twisted profile (4, 4).

    Returns:
        Step4Family: Family with free parameters t₁..t₄.
    """
    disc, frame = flat_base
    theta: ThetaFrame = twist_theta(structured_theta(frame, (1, 0)), STEP4_ELLS, STEP4_EPS)
    return Step4Family(AttachmentTarget.linear(theta.loop()), disc, theta)


@pytest.fixture(scope="session")
def quadric_base(quadric: GraphManifold, fine_grid: BoundaryGrid) -> tuple[AnalyticDisc, FrameLoop]:
    """Reference disc and R₁ frame of the quadric on the fine grid.

    Returns:
        tuple[AnalyticDisc, FrameLoop]: Disc and its R₁ frame.
    """
    disc = reference_disc(quadric, RHO0, fine_grid)
    return disc, build_R1_frame(quadric, disc)


@pytest.fixture(scope="session")
def quadric_step4_family(quadric: GraphManifold, quadric_base: tuple[AnalyticDisc, FrameLoop]) -> Step4Family:
    """Step-4 family attached to the second-order model of the quadric's R₁.

    Returns:
        Step4Family: Twisted profile (4, 4) on the glued manifold target.
    """
    disc, frame = quadric_base
    theta = twist_theta(structured_theta(frame, (1, 0)), STEP4_ELLS, STEP4_EPS)
    target = manifold_target(frame, build_R1_hessian(quadric, disc, frame), theta, STEP4_EPS)
    return Step4Family(target, disc, theta)
