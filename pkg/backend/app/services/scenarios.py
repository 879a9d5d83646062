"""Scenario runner: validated configs in, checks and artifacts out.

Each scenario writes ``results.json`` (sorted keys, no timestamp, so
identical configs reproduce it byte for byte) plus per-object CSV/JSON
files. Every file is written to a temporary sibling and renamed into
place.
"""

import json
import logging
import os
import tempfile
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from app.core.config import settings
from app.discs.bishop import (
    AnalyticDisc,
    GraphManifold,
    attachment_residual,
    bishop_family,
    build_R1_frame,
    build_R1_hessian,
    reference_disc,
)
from app.discs.boundary import BoundaryFunction, BoundaryGrid, smoothness_report, write_csv
from app.discs.conjugation import negative_spectrum_masses
from app.discs.errors import DiscsError
from app.discs.frames import FrameLoop, IndexProfile, ThetaFrame, partial_indices, structured_theta
from app.discs.globevnik import (
    AttachmentTarget,
    CheckReport,
    Step4Family,
    derivative_check,
    family_jacobian_rank,
    fixed_center_sweep,
    foliation_rank,
    manifold_target,
    param_space_dim,
    rank_report,
    write_sweep_csv,
)
from app.discs.twist import twist_frame, twist_theta
from app.services.schemas import (
    BishopSolveConfig,
    FullPipelineConfig,
    GlobevnikFamilyConfig,
    R1IndicesConfig,
    ReferenceDiscConfig,
    ScenarioConfig,
    Step4Config,
    Step4VerifyConfig,
    TargetKind,
    Tolerances,
    TwistIndicesConfig,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = Path("results")

SCENARIO_CONFIGS: dict[str, type[ScenarioConfig]] = {
    "bishop-solve": BishopSolveConfig,
    "reference-disc": ReferenceDiscConfig,
    "r1-indices": R1IndicesConfig,
    "twist-indices": TwistIndicesConfig,
    "globevnik-family": GlobevnikFamilyConfig,
    "step4-verify": Step4VerifyConfig,
    "full-pipeline": FullPipelineConfig,
}

# Config tolerance name -> settings field
_TOLERANCE_FIELDS = {
    "solver": "SOLVER_TOL",
    "holomorphy": "HOLOMORPHY_TOL",
    "rank_cutoff": "RANK_CUTOFF",
    "center": "CENTER_TOL",
}


@dataclass(frozen=True)
class Scenario:
    """A named scenario with its validated config and output directory."""

    name: str
    config: ScenarioConfig
    output_dir: Path


@dataclass
class ScenarioResult:
    """Checks and summary values collected while running a scenario."""

    scenario: str
    checks: list[CheckReport] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when at least one check ran and every check passed."""
        return bool(self.checks) and all(check.passed for check in self.checks)

    def to_dict(self, config: ScenarioConfig) -> dict[str, Any]:
        """JSON-ready results."""
        return {
            "scenario": self.scenario,
            "pass": self.passed,
            "config": config.model_dump(mode="json"),
            "checks": [check.to_dict() for check in self.checks],
            "summary": self.summary,
        }


class ArtifactWriter:
    """Writes scenario artifacts atomically into one directory."""

    def __init__(self, directory: Path) -> None:
        """Create the writer.

        Args:
            directory: Output directory (created on first use).
        """
        self.directory = directory

    def write(self, name: str, write: Callable[[Path], None]) -> Path:
        """Write via a temporary sibling file, then rename into place.

        Args:
            name: File name inside the directory.
            write: Callback writing the content to the given path.

        Returns:
            Path: Final path of the artifact.
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.directory / name
        handle, temp_name = tempfile.mkstemp(dir=self.directory, prefix=f".{name}.", suffix=".tmp")
        os.close(handle)
        temp = Path(temp_name)
        try:
            write(temp)
            temp.replace(target)
        except BaseException:
            temp.unlink(missing_ok=True)
            raise
        return target

    def write_json(self, name: str, data: Any) -> Path:
        """Write JSON with sorted keys."""
        text = json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"
        return self.write(name, lambda path: path.write_text(text, encoding="utf-8"))

    def write_boundary_csv(self, name: str, function: BoundaryFunction) -> Path:
        """Write boundary samples as CSV."""
        return self.write(name, lambda path: write_csv(function, path))


@contextmanager
def applied_tolerances(tolerances: Tolerances) -> Iterator[None]:
    """Temporarily install scenario tolerances into the global settings.

    Yields:
        None
    """
    saved = {name: getattr(settings, name) for name in _TOLERANCE_FIELDS.values()}
    try:
        for key, name in _TOLERANCE_FIELDS.items():
            setattr(settings, name, getattr(tolerances, key))
        yield
    finally:
        for name, value in saved.items():
            setattr(settings, name, value)


def load_scenario(
    name: str,
    config_path: Path,
    *,
    out: Path | None = None,
    grid_size: int | None = None,
    tol: float | None = None,
) -> Scenario:
    """Read and validate a scenario config, applying command-line overrides.

    Args:
        name: Scenario name.
        config_path: JSON config file.
        out: Output directory; defaults to ``results/<name>``.
        grid_size: Overrides ``grid_size``.
        tol: Overrides ``tolerances.solver``.

    Returns:
        Scenario: The validated scenario.

    Raises:
        ValueError: If the scenario name is unknown.
        OSError: If the config cannot be read.
        json.JSONDecodeError: If the config is not JSON.
        pydantic.ValidationError: If the config does not match its schema.
    """
    if name not in SCENARIO_CONFIGS:
        msg = f"Unknown scenario {name!r}; choose from {sorted(SCENARIO_CONFIGS)}"
        raise ValueError(msg)
    schema = SCENARIO_CONFIGS[name]
    config = schema.model_validate(json.loads(config_path.read_text(encoding="utf-8")))
    if grid_size is not None or tol is not None:
        data = config.model_dump()
        if grid_size is not None:
            data["grid_size"] = grid_size
        if tol is not None:
            data["tolerances"]["solver"] = tol
        config = schema.model_validate(data)
    return Scenario(name=name, config=config, output_dir=out or DEFAULT_OUTPUT_ROOT / name)


def run(scenario: Scenario) -> ScenarioResult:
    """Execute a scenario and write its artifacts.

    Args:
        scenario: Validated scenario.

    Returns:
        ScenarioResult: Collected checks; ``results.json`` is written even
        when a check fails.
    """
    artifacts = ArtifactWriter(scenario.output_dir)
    logger.info("Running scenario %s into %s", scenario.name, scenario.output_dir)
    with applied_tolerances(scenario.config.tolerances):
        result = _RUNNERS[scenario.name](scenario.config, artifacts)
    artifacts.write_json("results.json", result.to_dict(scenario.config))
    logger.info("Scenario %s %s", scenario.name, "passed" if result.passed else "failed")
    return result


def _attempt[T](result: ScenarioResult, check: str, action: Callable[[], T]) -> T | None:
    """Run a stage; a library error becomes a failed check."""
    try:
        return action()
    except DiscsError as exc:
        logger.warning("Check %s failed: %s", check, exc)
        result.checks.append(
            CheckReport(check=check, passed=False, values={"error": type(exc).__name__, "message": str(exc)})
        )
        return None


def _complex_pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(c.real), float(c.imag)] for c in np.ravel(values)]


def _disc_checks(result: ScenarioResult, M: GraphManifold, disc: AnalyticDisc) -> None:
    residual = attachment_residual(M, disc)
    worst_mass = float(negative_spectrum_masses(disc.boundary).max())
    result.checks.append(
        CheckReport(
            check="attachment",
            passed=residual < settings.SOLVER_TOL,
            values={"residual": residual},
            tolerances={"attachment": settings.SOLVER_TOL},
        )
    )
    result.checks.append(
        CheckReport(
            check="holomorphy",
            passed=worst_mass < settings.HOLOMORPHY_TOL,
            values={"negative_spectrum_mass": worst_mass},
            tolerances={"holomorphy": settings.HOLOMORPHY_TOL},
        )
    )
    smooth = smoothness_report(disc.boundary)
    result.summary["disc"] = {
        "center": _complex_pairs(disc.center_value),
        "sup_norm": smooth.sup_norm,
        "tail_energy": smooth.tail_energy,
    }


def _reference_stage(
    result: ScenarioResult, M: GraphManifold, rho0: float, grid: BoundaryGrid, artifacts: ArtifactWriter
) -> AnalyticDisc | None:
    disc = _attempt(result, "reference_disc", lambda: reference_disc(M, rho0, grid))
    if disc is None:
        return None
    _disc_checks(result, M, disc)
    at_one = float(np.max(np.abs(disc.boundary.values[0])))
    result.checks.append(
        CheckReport(
            check="normalization",
            passed=at_one < settings.SOLVER_TOL,
            values={"abs_value_at_one": at_one},
            tolerances={"normalization": settings.SOLVER_TOL},
        )
    )
    artifacts.write_boundary_csv("reference_disc.csv", disc.boundary)
    return disc


def _index_check(result: ScenarioResult, check: str, profile: IndexProfile, expected: Sequence[int]) -> None:
    target = tuple(sorted(expected, reverse=True))
    result.checks.append(
        CheckReport(
            check=check,
            passed=profile.partial == target and profile.total == sum(target),
            values={
                "partial": list(profile.partial),
                "expected": list(target),
                "total": profile.total,
                "section_dims": {str(k): v for k, v in profile.section_dims.items()},
            },
        )
    )


def _r1_stage(
    result: ScenarioResult, M: GraphManifold, disc: AnalyticDisc, artifacts: ArtifactWriter
) -> tuple[FrameLoop, ThetaFrame] | None:
    frame = _attempt(result, "r1_frame", lambda: build_R1_frame(M, disc))
    if frame is None:
        return None
    artifacts.write_json("r1_frame.json", frame.to_json())
    profile = _attempt(result, "r1_indices", lambda: partial_indices(frame))
    if profile is None:
        return None
    _index_check(result, "r1_indices", profile, (2,) + (0,) * (M.N - 1))
    theta = _attempt(result, "r1_structure", lambda: structured_theta(frame, (1,) + (0,) * (M.N - 1)))
    return None if theta is None else (frame, theta)


def _twist_stage(
    result: ScenarioResult,
    frame: FrameLoop,
    theta: ThetaFrame,
    ells: Sequence[int],
    eps: float,
    artifacts: ArtifactWriter,
) -> ThetaFrame | None:
    twisted = _attempt(result, "twist", lambda: twist_frame(frame, theta, ells, eps))
    if twisted is None:
        return None
    artifacts.write_json("twisted_frame.json", twisted.to_json())
    profile = _attempt(result, "twist_indices", lambda: partial_indices(twisted))
    if profile is None:
        return None
    _index_check(result, "twist_indices", profile, (2 + 2 * ells[0], *(2 * ell for ell in ells[1:])))
    return twist_theta(theta, ells, eps)


def _attachment_target(
    result: ScenarioResult,
    kind: TargetKind,
    M: GraphManifold,
    disc: AnalyticDisc,
    frame: FrameLoop,
    theta: ThetaFrame,
    eps: float | None,
) -> AttachmentTarget | None:
    if kind is TargetKind.LINEAR:
        target = AttachmentTarget.linear(theta.loop())
    else:
        target = _attempt(
            result, "target", lambda: manifold_target(frame, build_R1_hessian(M, disc, frame), theta, eps)
        )
        if target is None:
            return None
    curvature = 0.0 if target.curvature is None else float(np.max(np.abs(target.curvature)))
    result.summary["target"] = {"kind": str(kind), "max_curvature": curvature}
    return target


def _step4_checks(
    result: ScenarioResult,
    config: Step4Config,
    M: GraphManifold,
    family: Step4Family,
    artifacts: ArtifactWriter,
    *,
    stop_on_failure: bool,
) -> None:
    def sweep() -> CheckReport:
        report, rows = fixed_center_sweep(family, config.sweep_radius, config.sweep_points)
        artifacts.write("fixed_center_sweep.csv", lambda path: write_sweep_csv(rows, path))
        return report

    stages: list[tuple[str, Callable[[], CheckReport]]] = [
        ("fixed_center", sweep),
        ("derivative", lambda: derivative_check(family, config.rho)),
        ("foliation_rank", lambda: foliation_rank(family, config.rho_eps)),
        ("rank_report", lambda: rank_report(M, config.rho0, grid=family.base.grid)),
    ]
    for name, action in stages:
        report = _attempt(result, name, action)
        if report is not None:
            result.checks.append(report)
        if stop_on_failure and not result.passed:
            result.summary["stopped_at"] = name
            return


def _run_bishop_solve(config: BishopSolveConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("bishop-solve")
    M = config.manifold.build()
    grid = BoundaryGrid(config.grid_size or settings.DEFAULT_GRID_SIZE)
    s = np.zeros(2 * M.m + M.n - 1) if config.s is None else np.asarray(config.s)
    v = np.zeros(M.n - 1) if config.v is None else np.asarray(config.v)
    disc = _attempt(result, "bishop_solve", lambda: bishop_family(M, config.rho, s, v, grid=grid))
    if disc is not None:
        _disc_checks(result, M, disc)
        artifacts.write_boundary_csv("disc.csv", disc.boundary)
    return result


def _run_reference_disc(config: ReferenceDiscConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("reference-disc")
    grid = BoundaryGrid(config.grid_size or settings.DEFAULT_GRID_SIZE)
    _reference_stage(result, config.manifold.build(), config.rho0, grid, artifacts)
    return result


def _run_r1_indices(config: R1IndicesConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("r1-indices")
    M = config.manifold.build()
    disc = _reference_stage(result, M, config.rho0, BoundaryGrid(config.grid_size or settings.DEFAULT_GRID_SIZE), artifacts)
    if disc is not None:
        _r1_stage(result, M, disc, artifacts)
    return result


def _run_twist_indices(config: TwistIndicesConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("twist-indices")
    M = config.manifold.build()
    grid = BoundaryGrid(config.required_grid_size(settings.DEFAULT_GRID_SIZE))
    result.summary["grid_size"] = grid.size
    disc = _reference_stage(result, M, config.rho0, grid, artifacts)
    r1 = None if disc is None else _r1_stage(result, M, disc, artifacts)
    if r1 is not None:
        _twist_stage(result, *r1, config.twist_orders(), config.eps, artifacts)
    return result


def _run_globevnik_family(config: GlobevnikFamilyConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("globevnik-family")
    M = config.manifold.build()
    grid = BoundaryGrid(config.required_grid_size(settings.DEFAULT_GRID_SIZE))
    result.summary["grid_size"] = grid.size
    disc = _reference_stage(result, M, config.rho0, grid, artifacts)
    r1 = None if disc is None else _r1_stage(result, M, disc, artifacts)
    if disc is None or r1 is None:
        return result
    ells = config.twist_orders()
    theta = twist_theta(r1[1], ells, config.eps)
    target = _attachment_target(result, config.target, M, disc, r1[0], theta, config.eps if any(ells) else None)
    if target is None:
        return result
    expected = param_space_dim(theta.profile)
    rank = _attempt(result, "parameter_count", lambda: family_jacobian_rank(target, disc, theta))
    if rank is not None:
        result.checks.append(
            CheckReport(
                check="parameter_count",
                passed=rank == expected,
                values={"rank": rank, "expected": expected, "profile": list(theta.profile)},
                tolerances={"rank_cutoff": settings.RANK_CUTOFF},
            )
        )
    return result


def _step4_family(
    result: ScenarioResult, config: Step4Config, artifacts: ArtifactWriter
) -> tuple[GraphManifold, Step4Family] | None:
    M = config.manifold.build()
    grid = BoundaryGrid(config.required_grid_size(settings.DEFAULT_GRID_SIZE))
    result.summary["grid_size"] = grid.size
    disc = _reference_stage(result, M, config.rho0, grid, artifacts)
    if disc is None or not result.passed:
        return None
    r1 = _r1_stage(result, M, disc, artifacts)
    if r1 is None or not result.passed:
        return None
    theta = _twist_stage(result, *r1, config.twist_orders(), config.eps, artifacts)
    if theta is None or not result.passed:
        return None
    result.summary["profile"] = list(theta.profile)
    target = _attachment_target(result, config.target, M, disc, r1[0], theta, config.eps)
    return None if target is None else (M, Step4Family(target, disc, theta))


def _run_step4_verify(config: Step4VerifyConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("step4-verify")
    built = _step4_family(result, config, artifacts)
    if built is not None:
        _step4_checks(result, config, *built, artifacts, stop_on_failure=False)
    return result


def _run_full_pipeline(config: FullPipelineConfig, artifacts: ArtifactWriter) -> ScenarioResult:
    result = ScenarioResult("full-pipeline")
    built = _step4_family(result, config, artifacts)
    if built is None:
        failed = [check.check for check in result.checks if not check.passed]
        result.summary["stopped_at"] = failed[0] if failed else "setup"
        return result
    _step4_checks(result, config, *built, artifacts, stop_on_failure=True)
    return result


_RUNNERS: dict[str, Callable[[Any, ArtifactWriter], ScenarioResult]] = {
    "bishop-solve": _run_bishop_solve,
    "reference-disc": _run_reference_disc,
    "r1-indices": _run_r1_indices,
    "twist-indices": _run_twist_indices,
    "globevnik-family": _run_globevnik_family,
    "step4-verify": _run_step4_verify,
    "full-pipeline": _run_full_pipeline,
}
