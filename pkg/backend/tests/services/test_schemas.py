"""Tests for scenario config schemas."""

import pytest
from pydantic import ValidationError

from app.core.config import settings
from app.services.schemas import (
    BishopSolveConfig,
    GlobevnikFamilyConfig,
    ManifoldConfig,
    ReferenceDiscConfig,
    Step4Config,
    TargetKind,
    Tolerances,
    TwistConfig,
)


class TestTolerances:
    """Tests for the tolerance block."""

    def test_defaults(self) -> None:
        """Defaults match the documented values."""
        tol = Tolerances()
        assert (tol.solver, tol.holomorphy, tol.rank_cutoff, tol.center) == (1e-10, 1e-10, 1e-8, 1e-9)

    def test_rejects_nonpositive(self) -> None:
        """Tolerances must be positive."""
        with pytest.raises(ValidationError):
            Tolerances(solver=0.0)


class TestManifoldConfig:
    """Tests for ManifoldConfig."""

    def test_builds_manifold(self) -> None:
        """Terms become the graphing polynomial."""
        config = ManifoldConfig.model_validate(
            {"m": 1, "n": 1, "terms": [{"coeff": 1.0, "powers": [2, 0, 0]}, {"coeff": 1.0, "powers": [0, 2, 0]}]}
        )
        M = config.build()
        assert M.N == 2
        assert M.h.degree == 2

    def test_rejects_linear_terms(self) -> None:
        """Invalid polynomials fail validation, not the run."""
        with pytest.raises(ValidationError, match="constant or linear"):
            ManifoldConfig.model_validate({"m": 1, "n": 1, "terms": [{"coeff": 1.0, "powers": [1, 0, 0]}]})

    def test_rejects_wrong_exponent_count(self) -> None:
        """Each monomial has 2m + n exponents."""
        with pytest.raises(ValidationError, match="exponents"):
            ManifoldConfig.model_validate({"m": 1, "n": 1, "terms": [{"coeff": 1.0, "powers": [2, 0]}]})


class TestScenarioConfigs:
    """Tests for the per-scenario schemas."""

    def test_rejects_unknown_keys(self) -> None:
        """Typos in config keys are errors."""
        with pytest.raises(ValidationError, match="rho_0"):
            ReferenceDiscConfig.model_validate({"rho_0": 0.1})

    @pytest.mark.parametrize("size", [100, 4])
    def test_rejects_bad_grid_size(self, size: int) -> None:
        """Grid sizes are powers of two >= 8."""
        with pytest.raises(ValidationError, match="power of two"):
            ReferenceDiscConfig(grid_size=size)

    def test_bishop_parameter_lengths(self) -> None:
        """s has 2m + n − 1 entries and v has n − 1."""
        config = BishopSolveConfig.model_validate({"manifold": {"m": 1, "n": 2}, "s": [0.0, 0.0, 0.0], "v": [0.1]})
        assert config.v == [0.1]
        with pytest.raises(ValidationError, match="s must have 3 entries"):
            BishopSolveConfig.model_validate({"manifold": {"m": 1, "n": 2}, "s": [0.0]})
        with pytest.raises(ValidationError, match="v must have 1 entries"):
            BishopSolveConfig.model_validate({"manifold": {"m": 1, "n": 2}, "v": []})

    def test_twist_defaults(self) -> None:
        """Twist orders default to (1, 2, …, 2) and the grid grows to fit them."""
        config = TwistConfig.model_validate({"manifold": {"m": 1, "n": 2}, "eps": 4.0})
        assert config.twist_orders() == (1, 2, 2)
        assert config.required_grid_size(256) == 1024
        assert TwistConfig(grid_size=2048, eps=4.0).required_grid_size(256) == 2048

    def test_eps_defaults_to_setting(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """ε comes from DISCS_TWIST_EPS when the config leaves it out."""
        assert TwistConfig().eps == settings.TWIST_EPS == 0.4
        assert TwistConfig().required_grid_size(256) == 16384
        monkeypatch.setattr(settings, "TWIST_EPS", 2.0)
        assert TwistConfig().eps == 2.0

    def test_target_defaults_to_manifold(self) -> None:
        """Step-4 and family configs attach to the manifold model unless asked for the linear target."""
        assert Step4Config().target is TargetKind.MANIFOLD
        assert GlobevnikFamilyConfig.model_validate({"target": "linear"}).target is TargetKind.LINEAR
        with pytest.raises(ValidationError):
            Step4Config.model_validate({"target_curvature": 1.0})

    def test_twist_length(self) -> None:
        """One twist order per column."""
        with pytest.raises(ValidationError, match="ells must have 2 entries"):
            TwistConfig.model_validate({"ells": [1]})

    def test_family_defaults_to_no_twist(self) -> None:
        """The parameter-count scenario runs on the untwisted frame by default."""
        config = GlobevnikFamilyConfig()
        assert config.twist_orders() == (0, 0)
        assert config.required_grid_size(256) == 256

    def test_step4_needs_index_four(self) -> None:
        """Step-4 configs require twisted indices >= 4."""
        assert Step4Config().twist_orders() == (1, 2)
        with pytest.raises(ValidationError, match="Step-4"):
            Step4Config.model_validate({"ells": [0, 2]})
        with pytest.raises(ValidationError):
            Step4Config.model_validate({"sweep_points": 1})
