"""Command computations: analyze a metric spec, tabulate one quantity, run the suite."""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from src.common.logging import get_logger
from src.qcurv.analysis import MetricAnalysis, analyze_metric, build_metric
from src.qcurv.curvature import q_density, scalar_curvature
from src.qcurv.entropy import volume_curve
from src.qcurv.errors import DomainError
from src.qcurv.numerics import RadialGrid, quadrature_tolerance
from src.qcurv.potential import log_potential
from src.qcurv.profiles import ConformalMetric
from src.qcurv.report import Report, analysis_report, suite_report
from src.qcurv.specfile import MetricSpec
from src.qcurv.verify import CheckResult, SuiteConfig, SuiteReport, metric_checks, run_suite

_logger = get_logger(__name__)

TABLE_QUANTITIES = ("u", "potential", "q_density", "scalar", "volume")

# Fixed float format of every table dump
FLOAT_FORMAT = "%.12g"


def metric_from_spec(spec: MetricSpec) -> ConformalMetric:
    return build_metric(spec.n, spec.family, spec.params)


@dataclass
class AnalyzeResult:
    """Report, profile dump and the underlying analysis."""

    report: Report
    table: pd.DataFrame
    analysis: MetricAnalysis
    checks: list[CheckResult]


def profile_table(analysis: MetricAnalysis) -> pd.DataFrame:
    """Columns r, u, q_density (Q e^{nu}), scalar (R_g), potential (L(Q e^{nu})) and p; NaN where a stage did not run."""
    r = analysis.grid.nodes
    missing = np.full(len(r), np.nan)
    curvature = analysis.curvature
    decomposition = analysis.decomposition
    return pd.DataFrame(
        {
            "r": r,
            "u": analysis.metric.u(r),
            "q_density": curvature.q_density if curvature is not None else missing,
            "scalar": curvature.scalar if curvature is not None else scalar_curvature(analysis.metric, r),
            "potential": decomposition.potential_samples if decomposition is not None else missing,
            "p": decomposition.p_samples if decomposition is not None else missing,
        }
    )


def cmd_analyze(spec: MetricSpec) -> AnalyzeResult:
    """
    Curvature, entropy, decomposition, then the per-metric checks.

    Raises:
        InvalidSpec: The metric cannot be built from the spec
        NumericalError: A stage failed numerically
    """
    with quadrature_tolerance(spec.tolerance):
        metric = metric_from_spec(spec)
        _logger.info("Analyzing %s in n=%d", metric.u.name, spec.n)
        analysis = analyze_metric(metric, spec.grid(), spec.toggles)
        checks = metric_checks(analysis)
    return AnalyzeResult(analysis_report(spec, analysis, checks), profile_table(analysis), analysis, checks)


def _table_u(spec: MetricSpec, metric: ConformalMetric, grid: RadialGrid) -> pd.DataFrame:
    r = grid.nodes
    return pd.DataFrame({"r": r, "u": metric.u(r)})


def _table_potential(spec: MetricSpec, metric: ConformalMetric, grid: RadialGrid) -> pd.DataFrame:
    # the spec's profile is read as a density f
    r = grid.nodes
    return pd.DataFrame({"r": r, "potential": log_potential(metric.u, r, spec.n)})


def _table_q_density(spec: MetricSpec, metric: ConformalMetric, grid: RadialGrid) -> pd.DataFrame:
    result = q_density(metric, grid)
    return pd.DataFrame({"r": grid.nodes, "q_density": result.values, "error_estimate": result.error_estimates})


def _table_scalar(spec: MetricSpec, metric: ConformalMetric, grid: RadialGrid) -> pd.DataFrame:
    r = grid.nodes
    return pd.DataFrame({"r": r, "scalar": scalar_curvature(metric, r)})


def _table_volume(spec: MetricSpec, metric: ConformalMetric, grid: RadialGrid) -> pd.DataFrame:
    curve = volume_curve(metric, grid)
    return pd.DataFrame({"R": curve.radii, "volume": curve.volumes, "log_volume": curve.log_volumes})


_TABLES: dict[str, Callable[[MetricSpec, ConformalMetric, RadialGrid], pd.DataFrame]] = {
    "u": _table_u,
    "potential": _table_potential,
    "q_density": _table_q_density,
    "scalar": _table_scalar,
    "volume": _table_volume,
}


def cmd_table(spec: MetricSpec, quantity: str) -> pd.DataFrame:
    """
    One quantity on the spec's grid.

    "potential" applies L to the spec's profile read as a density.

    Raises:
        DomainError: Unknown quantity
    """
    builder = _TABLES.get(quantity)
    if builder is None:
        raise DomainError(f"quantity must be one of {', '.join(TABLE_QUANTITIES)}, got '{quantity}'")
    with quadrature_tolerance(spec.tolerance):
        metric = metric_from_spec(spec)
        return builder(spec, metric, spec.grid())


def cmd_verify(
    config: SuiteConfig, *, progress_callback: Callable[[int, int], None] | None = None
) -> tuple[Report, SuiteReport]:
    """Run the suite and render its report."""
    suite = run_suite(config, progress_callback=progress_callback)
    return suite_report(suite), suite


def write_table(table: pd.DataFrame, path) -> None:
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
