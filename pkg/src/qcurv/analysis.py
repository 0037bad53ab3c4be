"""Metric construction from family names and the full per-metric analysis."""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping

from src.common.logging import get_logger
from src.qcurv.curvature import CurvatureReport, curvature_report
from src.qcurv.decomposition import (
    DecompositionResult,
    LowerBoundReport,
    NormalityReport,
    lower_bound_checks,
    normality_test,
    polynomial_part,
)
from src.qcurv.entropy import EntropyEstimate, RayDistance, VolumeCurve, h_estimate, ray_distance, tau_estimate, volume_curve
from src.qcurv.errors import FiniteTotalQViolated, Inconclusive, InvalidSpec, OperandNotInDomain
from src.qcurv.numerics import RadialGrid, default_grid, validate_dimension
from src.qcurv.potential import potential_metric_profile, scaled_density
from src.qcurv.profiles import FAMILY_NAMES, ConformalMetric, builtin_profile, read_table, sampled_profile

_logger = get_logger(__name__)

METRIC_FAMILIES = (*FAMILY_NAMES, "potential", "sampled")

# Radius at which ray distances are reported
RAY_RADIUS = 1e4


@lru_cache(maxsize=32)
def _potential_u(n: int, density: str, alpha: float, quadratic: float):
    return potential_metric_profile(scaled_density(density, alpha, n), n, quadratic)


def build_metric(n: int, family: str, params: Mapping[str, object] | None = None) -> ConformalMetric:
    """
    Conformal metric from a family name.

    Families: every builtin profile, "potential" (u = quadratic r^2 + L(density) with
    density "bump" or "sphere" scaled to alpha), and "sampled" (path, order).

    Raises:
        InvalidSpec: Unknown family or bad parameters
    """
    n = validate_dimension(n)
    params = dict(params or {})
    if family == "potential":
        unknown = set(params) - {"density", "alpha", "quadratic"}
        if unknown or "alpha" not in params:
            raise InvalidSpec(
                [f"potential: unknown parameter '{k}'" for k in sorted(unknown)]
                + ([] if "alpha" in params else ["potential: missing parameter 'alpha'"])
            )
        density = str(params.get("density", "bump"))
        if density not in ("bump", "sphere"):
            raise InvalidSpec(f"potential: density must be 'bump' or 'sphere', got '{density}'")
        u = _potential_u(n, density, float(params["alpha"]), float(params.get("quadratic", 0.0)))
        return ConformalMetric(n, u)
    if family == "sampled":
        if "path" not in params:
            raise InvalidSpec("sampled: missing parameter 'path'")
        table = read_table(str(params["path"]))
        order = int(float(params.get("order", 3)))
        return ConformalMetric(n, sampled_profile(table, order, name=f"sampled({params['path']})"))
    if family == "bump" and "n" not in params:
        params["n"] = n
    return ConformalMetric(n, builtin_profile(family, {k: float(v) for k, v in params.items()}))


@dataclass(frozen=True)
class AnalysisToggles:
    """Stages of the per-metric analysis."""

    curvature: bool = True
    entropy: bool = True
    decomposition: bool = True


@dataclass
class MetricAnalysis:
    """Everything computed for one metric; stages that could not run are None with a warning."""

    metric: ConformalMetric
    grid: RadialGrid
    curvature: CurvatureReport | None = None
    volume: VolumeCurve | None = None
    tau: EntropyEstimate | None = None
    h: EntropyEstimate | None = None
    ray: RayDistance | None = None
    decomposition: DecompositionResult | None = None
    normality: NormalityReport | None = None
    lower_bounds: LowerBoundReport | None = None
    warnings: list[str] = field(default_factory=list)


def analyze_metric(
    metric: ConformalMetric, grid: RadialGrid | None = None, toggles: AnalysisToggles | None = None
) -> MetricAnalysis:
    """
    Curvature, then entropy, then decomposition.

    Operand-domain and integrability failures of the Q density are recorded as warnings;
    the stages that depend on the density are then skipped.
    """
    grid = grid or default_grid()
    toggles = toggles or AnalysisToggles()
    analysis = MetricAnalysis(metric=metric, grid=grid)
    name = metric.u.name

    if toggles.curvature:
        try:
            analysis.curvature = curvature_report(metric, grid)
        except (OperandNotInDomain, FiniteTotalQViolated, Inconclusive) as e:
            analysis.warnings.append(f"curvature: {e}")
            _logger.warning("%s: curvature stage skipped: %s", name, e)

    if toggles.entropy:
        analysis.volume = volume_curve(metric)
        analysis.tau = tau_estimate(analysis.volume)
        analysis.h = h_estimate(analysis.volume, analysis.tau)
        analysis.ray = ray_distance(metric, RAY_RADIUS)
        if analysis.tau.inconclusive:
            analysis.warnings.append(f"tau: {analysis.tau.note}")

    if toggles.decomposition and analysis.curvature is not None:
        try:
            decomposition = polynomial_part(metric, grid, analysis.curvature.density)
        except (OperandNotInDomain, Inconclusive) as e:
            analysis.warnings.append(f"decomposition: {e}")
            _logger.warning("%s: decomposition skipped: %s", name, e)
        else:
            bounds = lower_bound_checks(metric, decomposition, analysis.curvature.sign)
            analysis.lower_bounds = bounds
            analysis.decomposition = replace(decomposition, lower_bound_margin=bounds.p_margin)
            if analysis.tau is not None:
                analysis.normality = normality_test(
                    metric, grid, decomposition=analysis.decomposition, tau=analysis.tau
                )
                if not analysis.normality.consistent:
                    analysis.warnings.append("normality verdict disagrees with the tau divergence flag")
    return analysis
