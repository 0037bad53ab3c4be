"""Numerical checks binding the far-field, entropy and curvature statements to measurements.

Every check reports predicted and measured values, the stability band of the
measurement and the tolerance it is judged against. Checks whose hypotheses do not
hold on the grid are skipped with a note, never failed.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from src.common.config import DEFAULT_MAX_WORKERS
from src.common.logging import get_logger
from src.qcurv.analysis import MetricAnalysis, analyze_metric, build_metric
from src.qcurv.curvature import ScalarSign, scalar_curvature, scalar_limit, total_q
from src.qcurv.decomposition import Verdict
from src.qcurv.entropy import Completeness, ray_distance
from src.qcurv.errors import DomainError, InvalidSpec, NumericalError, QCurvError, UnsupportedCheck
from src.qcurv.numerics import (
    FitResult,
    RadialGrid,
    default_grid,
    dimension_constants,
    fit_semilog_slope,
    geometric_breakpoints,
    integrate_segments,
    log_integral_exp,
)
from src.qcurv.operators import (
    HalfLapConfig,
    half_laplacian,
    half_laplacian_profile,
    halflap_fourier_oracle,
    radial_laplacian,
)
from src.qcurv.potential import (
    alpha_of,
    ball_average,
    greens_property_check,
    log_potential,
    log_potential_derivative,
    log_potential_laplacian,
    potential_profile,
    scaled_density,
)
from src.qcurv.profiles import (
    ConformalMetric,
    RadialProfile,
    TailKind,
    TailModel,
    builtin_profile,
    composite_profile,
)

_logger = get_logger(__name__)

# Sample radii of the far-field measurements
FAR_RADII = np.geomspace(1e2, 1e4, 9)
BALL_CENTERS = np.geomspace(1e2, 1e4, 7)
SHELL_RADII = np.geomspace(1e2, 1e3, 7)
LINE_INDICES = np.unique(np.round(np.geomspace(100.0, 1000.0, 9)))
MASS_RADII = np.geomspace(1e2, 1e4, 9)
BLOWDOWN_RADII = np.array([1e2, 1e3])
ORACLE_RADII = np.concatenate([[1e-3], np.linspace(0.25, 3.0, 12)])
# Beyond 1e2 the bending term of decaying u loses digits to cancellation
SPOT_RADII = np.geomspace(1e-3, 1e2, 61)

BALL_MODES = ("fixed", "proportional", "shrinking")

ANCHORS: dict[str, str] = {
    "farfield": "L(f)(x) = (-alpha + o(1)) log|x| for compactly supported f",
    "ball_averages": "averages of L(f) over B_r0(x), B_{r1|x|}(x) and B_{|x|^-r2}(x) are (-alpha + o(1)) log|x|",
    "shell_exponent": "int over B_{R+1} minus B_{R-1} of e^{n L(f)} = R^{n-1-n alpha+o(1)}",
    "line_integral": "int_i^{i+1} e^{L(f)(t)} dt <= i^{-alpha+o(1)}, attained for radial f",
    "mass_bound": "int over B_R of |L(f)| = O(R^n log R)",
    "incompleteness": "alpha > 1 makes sum i^{-alpha} finite and the ray length finite",
    "blowdown_laplacian": "r^2 (-Delta) L(Q e^{nu}) -> (n-2) alpha_0",
    "blowdown_gradient": "r^2 |grad L(Q e^{nu})|^2 -> alpha_0^2",
    "blowdown_log": "L(Q e^{nu}) = (-alpha_0 + o(1)) log r",
    "cohn_vossen": "complete normal metrics have int Q e^{nu} <= (n-1)! |S^n| / 2, i.e. alpha_0 <= 1",
    "tau_formula": "complete normal metrics have tau(g) = 1 - alpha_0",
    "h_theorem": "complete, R_g >= -C: h(g) is an even integer in [0, n-1]",
    "h_degree": "complete, R_g >= -C: h(g) equals the degree of the polynomial part of u",
    "scalar_conditional": "R_g >= 0 near infinity: normal and tau <= 1; R_g >= C > 0: tau = 0",
    "alpha_range": "R_g >= 0 near infinity: 0 <= alpha_0 <= 2, alpha_0 <= 1 when complete, alpha_0 >= 1 when R_g >= C > 0",
    "scalar_limit": "r^2 (-Delta u - (n-2)/2 |grad u|^2) -> (n-2) alpha_0 - (n-2)/2 alpha_0^2 for normal u",
    "greens_property": "(-Delta)^{n/2} L(f) = f",
    "halflap_oracle": "principal-value (-Delta)^{1/2} agrees with the Fourier multiplier |xi|",
    "halflap_composition": "(-Delta)^{1/2} (-Delta)^{1/2} f = -Delta f",
    "area_law": "u = r^2 - beta log(1 + r^2) has int Q e^{nu} = (n-1)! |S^n| beta",
    "scalar_spot": "R_g from the analytic derivatives of u",
}


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check; predicted is None for predicate checks."""

    check_id: str
    subject: str
    predicted: float | None
    measured: float | None
    tolerance: float
    passed: bool
    band: tuple[float, float] | None = None
    predicate: str = ""
    skipped: bool = False
    notes: tuple[str, ...] = ()
    # Set when the check aborted on a numerical failure rather than a measurement
    numerical: bool = False

    @property
    def anchor(self) -> str:
        return ANCHORS.get(self.check_id, "")

    @property
    def status(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"


def _compare(
    check_id: str,
    subject: str,
    predicted: float,
    measured: float,
    tolerance: float,
    *,
    band: tuple[float, float] | None = None,
    relative: bool = False,
    notes: tuple[str, ...] = (),
) -> CheckResult:
    """|measured - predicted| <= tolerance, and a stability band no wider than the tolerance."""
    limit = tolerance * abs(predicted) if relative and predicted != 0.0 else tolerance
    passed = bool(math.isfinite(measured) and abs(measured - predicted) <= limit)
    if band is not None and 0.5 * (band[1] - band[0]) > limit:
        passed = False
        notes = (*notes, f"stability band half-width {0.5 * (band[1] - band[0]):.3g} exceeds tolerance {limit:.3g}")
    if relative:
        notes = (*notes, "relative tolerance")
    return CheckResult(check_id, subject, float(predicted), float(measured), tolerance, passed, band=band, notes=notes)


def _predicate(
    check_id: str,
    subject: str,
    holds: bool,
    predicate: str,
    *,
    measured: float | None = None,
    tolerance: float = 0.0,
    notes: tuple[str, ...] = (),
) -> CheckResult:
    return CheckResult(
        check_id, subject, None, measured, tolerance, bool(holds), predicate=predicate, notes=notes
    )


def _skip(check_id: str, subject: str, reason: str) -> CheckResult:
    _logger.info("%s skipped for %s: %s", check_id, subject, reason)
    return CheckResult(check_id, subject, None, None, 0.0, True, skipped=True, notes=(reason,))


def _trend(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Slope of y against log x over all points."""
    return fit_semilog_slope(x, y, fraction=1.0, min_points=len(x))


def _negated(band: tuple[float, float]) -> tuple[float, float]:
    return (-band[1], -band[0])


def _span(x: np.ndarray) -> str:
    return f"R in [{x[0]:g}, {x[-1]:g}], {len(x)} radii"


def _profile_subject(f: RadialProfile, n: int) -> str:
    return f"{f.name} n={n}"


# =============================================================================
# Densities
# =============================================================================


def density_from_params(n: int, params: Mapping[str, object]) -> RadialProfile:
    """
    Compactly supported or decaying density for the far-field checks.

    density: "bump" (default), "sphere" (rational, power n) or "dipole" (a bump of mass
    alpha plus two opposite bumps of equal mass, so the shape never vanishes).
    """
    shape = str(params.get("density", "bump"))
    alpha = float(params.get("alpha", 0.0))
    if shape == "dipole":
        near = builtin_profile("bump", {"alpha": 0.5, "n": n, "center": 1.0, "width": 0.5})
        far = builtin_profile("bump", {"alpha": 0.5, "n": n, "center": 2.5, "width": 0.5})
        return composite_profile([(scaled_density("bump", alpha, n), 1.0), (near, 1.0), (far, -1.0)])
    if shape not in ("bump", "sphere"):
        raise InvalidSpec(f"density must be bump, sphere or dipole, got '{shape}'")
    return scaled_density(shape, alpha, n)


# =============================================================================
# Far-field checks on L(f)
# =============================================================================


def check_farfield(f: RadialProfile, n: int, *, tolerance: float = 0.02) -> CheckResult:
    """Slope of L(f) against log R over [1e2, 1e4] equals -alpha."""
    alpha = alpha_of(f, n).alpha
    fit = _trend(FAR_RADII, log_potential(f, FAR_RADII, n))
    return _compare(
        "farfield",
        _profile_subject(f, n),
        alpha,
        -fit.slope,
        tolerance,
        band=_negated(fit.band),
        notes=(_span(FAR_RADII),),
    )


def _ball_radius(mode: str, center: float, parameter: float) -> float:
    if mode == "fixed":
        return parameter
    if mode == "proportional":
        return parameter * center
    return center**-parameter


def check_ball_averages(
    f: RadialProfile,
    n: int,
    mode: str = "fixed",
    parameter: float | None = None,
    *,
    tolerance: float = 0.05,
    potential: RadialProfile | None = None,
) -> CheckResult:
    """
    Ball averages of L(f) against log|x| have slope -alpha.

    Modes: fixed radius r0 (default 1), proportional radius r1 |x| (default 1/2) and
    shrinking radius |x|^{-r2} (default r2 = n - 2).

    Raises:
        DomainError: Unknown mode or parameter out of range
    """
    if mode not in BALL_MODES:
        raise DomainError(f"ball average mode must be one of {', '.join(BALL_MODES)}, got '{mode}'")
    if parameter is None:
        parameter = {"fixed": 1.0, "proportional": 0.5, "shrinking": float(n - 2)}[mode]
    if (mode == "fixed" and parameter <= 0) or (mode == "proportional" and not 0 < parameter < 1) or parameter < 0:
        raise DomainError(f"ball average parameter {parameter:g} out of range for mode '{mode}'")
    alpha = alpha_of(f, n).alpha
    potential = potential or potential_profile(f, n)
    averages = np.array(
        [ball_average(potential, float(x), _ball_radius(mode, float(x), parameter), n) for x in BALL_CENTERS]
    )
    fit = _trend(BALL_CENTERS, averages)
    return _compare(
        "ball_averages",
        f"{_profile_subject(f, n)} mode={mode}({parameter:g})",
        alpha,
        -fit.slope,
        tolerance,
        band=_negated(fit.band),
        notes=(_span(BALL_CENTERS),),
    )


def check_shell_exponent(
    f: RadialProfile, n: int, *, tolerance: float = 0.1, potential: RadialProfile | None = None
) -> CheckResult:
    """Log-log slope of the e^{n L(f)} mass of R - 1 < |x| < R + 1 equals n - 1 - n alpha."""
    alpha = alpha_of(f, n).alpha
    potential = potential or potential_profile(f, n)

    def exponent(r: np.ndarray) -> np.ndarray:
        return n * potential(r) + (n - 1) * np.log(r)

    logs = np.array([log_integral_exp(exponent, float(x) - 1.0, float(x) + 1.0) for x in SHELL_RADII])
    fit = _trend(SHELL_RADII, logs)
    return _compare(
        "shell_exponent",
        _profile_subject(f, n),
        n - 1 - n * alpha,
        fit.slope,
        tolerance,
        band=fit.band,
        notes=(_span(SHELL_RADII),),
    )


def _line_exponent(potential: RadialProfile) -> FitResult:
    logs = np.array([log_integral_exp(potential, float(i), float(i) + 1.0) for i in LINE_INDICES])
    return _trend(LINE_INDICES, logs)


def check_line_integral(
    f: RadialProfile, n: int, *, tolerance: float = 0.1, potential: RadialProfile | None = None
) -> CheckResult:
    """Slope of log int_i^{i+1} e^{L(f)} against log i equals -alpha."""
    alpha = alpha_of(f, n).alpha
    fit = _line_exponent(potential or potential_profile(f, n))
    return _compare(
        "line_integral",
        _profile_subject(f, n),
        -alpha,
        fit.slope,
        tolerance,
        band=fit.band,
        notes=(f"i in [{LINE_INDICES[0]:g}, {LINE_INDICES[-1]:g}]", "radial f attains the upper bound"),
    )


def check_mass_bound(
    f: RadialProfile, n: int, *, tolerance: float = 1.05, potential: RadialProfile | None = None
) -> CheckResult:
    """int_{B_R} |L(f)| dx / (R^n log R) at the last radius stays within tolerance times its head maximum."""
    potential = potential or potential_profile(f, n)
    area = dimension_constants(n).sphere_volume_n_minus_1
    power = n - 1
    first = float(MASS_RADII[0])
    pieces = [0.0, *geometric_breakpoints(1e-3, first)]
    if f.support is not None:
        pieces = sorted({*pieces, *(s for s in f.support if 0.0 < s < first)})
    cumulative = [integrate_segments(lambda s: abs(potential(s)) * s**power, pieces, label="mass_bound")[0]]
    for lo, hi in zip(MASS_RADII[:-1], MASS_RADII[1:]):
        piece = integrate_segments(lambda s: abs(potential(s)) * s**power, [float(lo), float(hi)], label="mass_bound")
        cumulative.append(cumulative[-1] + piece[0])
    ratios = area * np.array(cumulative) / (MASS_RADII**n * np.log(MASS_RADII))
    head = float(np.max(ratios[: len(ratios) // 2 + 1]))
    measured = float(ratios[-1] / head) if head > 0 else 0.0
    return _predicate(
        "mass_bound",
        _profile_subject(f, n),
        measured <= tolerance,
        f"ratio(R_max) <= {tolerance:g} * max ratio over the head",
        measured=measured,
        tolerance=tolerance,
        notes=(_span(MASS_RADII),),
    )


def check_incompleteness(f: RadialProfile, n: int, *, potential: RadialProfile | None = None) -> CheckResult:
    """For alpha > 1 the line-integral exponent is below -1 and u = L(f) has a finite ray length."""
    subject = _profile_subject(f, n)
    alpha = alpha_of(f, n).alpha
    if alpha <= 1.0:
        return _skip("incompleteness", subject, f"needs alpha > 1, got {alpha:.6g}")
    potential = potential or potential_profile(f, n)
    exponent = _line_exponent(potential).slope
    ray = ray_distance(ConformalMetric(n, potential), 1e4)
    holds = exponent < -1.0 and ray.completeness == Completeness.INCOMPLETE and math.isfinite(ray.distance_to_infinity)
    return _predicate(
        "incompleteness",
        subject,
        holds,
        "line exponent < -1, ray incomplete, D(inf) finite",
        measured=exponent,
        notes=(f"ray {ray.completeness.value}", f"D(inf) = {ray.distance_to_infinity:.6g}"),
    )


# =============================================================================
# Per-metric checks
# =============================================================================


def _metric_subject(analysis: MetricAnalysis) -> str:
    return f"{analysis.metric.u.name} n={analysis.metric.n}"


def _is_normal(analysis: MetricAnalysis) -> bool:
    return analysis.decomposition is not None and analysis.decomposition.verdict == Verdict.NORMAL


def _is_incomplete(analysis: MetricAnalysis) -> bool:
    return analysis.ray is not None and analysis.ray.completeness == Completeness.INCOMPLETE


def _completeness_note(analysis: MetricAnalysis) -> tuple[str, ...]:
    if analysis.ray is not None and analysis.ray.completeness == Completeness.INCONCLUSIVE:
        return ("completeness inconclusive; treated as complete",)
    return ()


def check_blowdown_limits(
    analysis: MetricAnalysis, *, tolerances: tuple[float, float, float] = (0.02, 0.02, 0.05)
) -> list[CheckResult]:
    """
    r^2 (-Delta) L, r^2 L'^2 and L / log r for L = L(Q e^{nu}) at r = 1e3, band over {1e2, 1e3}.

    The first two tolerances are relative; all three are absolute when the limit is 0.
    """
    ids = ("blowdown_laplacian", "blowdown_gradient", "blowdown_log")
    subject = _metric_subject(analysis)
    if analysis.curvature is None or not _is_normal(analysis):
        return [_skip(check_id, subject, "needs a normal metric") for check_id in ids]
    n = analysis.metric.n
    density = analysis.curvature.density
    alpha0 = analysis.curvature.alpha0
    r = BLOWDOWN_RADII
    measured = (
        -(r**2) * log_potential_laplacian(density, r, n),
        r**2 * log_potential_derivative(density, r, n) ** 2,
        log_potential(density, r, n) / np.log(r),
    )
    predicted = ((n - 2) * alpha0, alpha0**2, -alpha0)
    relative = (True, True, False)
    return [
        _compare(
            check_id,
            subject,
            target,
            float(values[-1]),
            tolerance,
            band=(float(np.min(values)), float(np.max(values))),
            relative=rel,
            notes=(f"r = {r[-1]:g}, band over r in {{{r[0]:g}, {r[-1]:g}}}",),
        )
        for check_id, target, values, tolerance, rel in zip(ids, predicted, measured, tolerances, relative)
    ]


def check_cohn_vossen(analysis: MetricAnalysis, *, tolerance: float = 0.01) -> CheckResult:
    """Not (normal and complete and alpha_0 > 1 + tolerance)."""
    subject = _metric_subject(analysis)
    if analysis.curvature is None:
        return _skip("cohn_vossen", subject, "total Q unavailable")
    alpha0 = analysis.curvature.alpha0
    notes = _completeness_note(analysis)
    if _is_incomplete(analysis):
        notes = (*notes, f"metric incomplete (D(inf) = {analysis.ray.distance_to_infinity:.6g}); bound vacuous")
    elif not _is_normal(analysis):
        notes = (*notes, "metric not normal; bound vacuous")
    holds = not (_is_normal(analysis) and not _is_incomplete(analysis) and alpha0 > 1.0 + tolerance)
    return _predicate(
        "cohn_vossen",
        subject,
        holds,
        f"not (normal and complete and alpha_0 > 1 + {tolerance:g})",
        measured=alpha0,
        tolerance=tolerance,
        notes=notes,
    )


def check_tau_formula(analysis: MetricAnalysis, *, tolerance: float = 0.05) -> CheckResult:
    """|tau - (1 - alpha_0)| <= tolerance for complete normal metrics."""
    subject = _metric_subject(analysis)
    if analysis.curvature is None or analysis.tau is None or not _is_normal(analysis):
        return _skip("tau_formula", subject, "needs a normal metric")
    if _is_incomplete(analysis):
        return _skip("tau_formula", subject, "metric incomplete")
    tau = analysis.tau
    n = analysis.metric.n
    band = (tau.fit.band[0] / n, tau.fit.band[1] / n) if tau.fit is not None else None
    return _compare(
        "tau_formula",
        subject,
        1.0 - analysis.curvature.alpha0,
        tau.value,
        tolerance,
        band=band,
        notes=_completeness_note(analysis),
    )


def _bounded_below_reason(analysis: MetricAnalysis) -> str | None:
    if analysis.curvature is None:
        return "scalar curvature unavailable"
    if analysis.curvature.sign.classification == ScalarSign.UNBOUNDED_BELOW:
        return "R_g not bounded below on the grid"
    if _is_incomplete(analysis):
        return "metric incomplete"
    return None


def check_h_theorem(analysis: MetricAnalysis, *, tolerance: float = 0.15) -> CheckResult:
    """Raw h within tolerance of an even integer in [0, n - 1]."""
    subject = _metric_subject(analysis)
    reason = _bounded_below_reason(analysis) or (None if analysis.h is not None else "h unavailable")
    if reason:
        return _skip("h_theorem", subject, reason)
    n = analysis.metric.n
    raw = analysis.h.raw
    nearest = 2 * round(raw / 2.0)
    holds = abs(raw - nearest) <= tolerance and 0 <= nearest <= n - 1
    return _predicate(
        "h_theorem",
        subject,
        holds,
        f"h within {tolerance:g} of an even integer in [0, {n - 1}]",
        measured=raw,
        tolerance=tolerance,
        notes=(f"nearest even integer {nearest}", *_completeness_note(analysis)),
    )


def check_h_degree(analysis: MetricAnalysis) -> CheckResult:
    """Snapped h equals the fitted degree of the polynomial part."""
    subject = _metric_subject(analysis)
    reason = _bounded_below_reason(analysis)
    if reason is None and (analysis.decomposition is None or analysis.h is None):
        reason = "decomposition unavailable"
    if reason:
        return _skip("h_degree", subject, reason)
    degree = analysis.decomposition.degree
    snapped = analysis.h.snapped
    return _predicate(
        "h_degree",
        subject,
        snapped is not None and snapped == degree,
        "snapped h == deg P",
        measured=analysis.h.raw,
        notes=(f"deg P = {degree}", f"snapped h = {snapped}"),
    )


def check_scalar_conditional(analysis: MetricAnalysis, *, tau_slack: float = 0.05) -> CheckResult:
    """R_g >= 0 near infinity: normal and tau <= 1; R_g >= C > 0 near infinity: tau = 0."""
    subject = _metric_subject(analysis)
    if analysis.curvature is None or analysis.tau is None:
        return _skip("scalar_conditional", subject, "curvature or entropy unavailable")
    sign = analysis.curvature.sign
    if sign.classification != ScalarSign.NONNEGATIVE:
        return _skip("scalar_conditional", subject, f"hypothesis not detected: R_g {sign.classification.value}")
    if _is_incomplete(analysis):
        return _skip("scalar_conditional", subject, "metric incomplete")
    tau = analysis.tau.value
    holds = _is_normal(analysis) and tau <= 1.0 + tau_slack
    predicate = f"normal and tau <= {1.0 + tau_slack:g}"
    if sign.bounded_away_from_zero:
        holds = holds and tau <= tau_slack
        predicate += f" and tau <= {tau_slack:g}"
    return _predicate(
        "scalar_conditional",
        subject,
        holds,
        predicate,
        measured=tau,
        tolerance=tau_slack,
        notes=(f"tail min R_g {sign.tail_min:.6g}", *_completeness_note(analysis)),
    )


def check_alpha_range(analysis: MetricAnalysis, *, tolerance: float = 0.05) -> CheckResult:
    """Range of alpha_0 implied by R_g >= 0 near infinity."""
    subject = _metric_subject(analysis)
    if analysis.curvature is None or not _is_normal(analysis):
        return _skip("alpha_range", subject, "needs a normal metric")
    sign = analysis.curvature.sign
    if sign.classification != ScalarSign.NONNEGATIVE:
        return _skip("alpha_range", subject, f"hypothesis not detected: R_g {sign.classification.value}")
    alpha0 = analysis.curvature.alpha0
    holds = -tolerance <= alpha0 <= 2.0 + tolerance
    predicate = "0 <= alpha_0 <= 2"
    if analysis.ray is not None and analysis.ray.completeness == Completeness.COMPLETE:
        holds = holds and alpha0 <= 1.0 + tolerance
        predicate += ", alpha_0 <= 1"
    if sign.bounded_away_from_zero:
        # alpha_0 >= 1; with the completeness bound above this pins alpha_0 = 1
        holds = holds and alpha0 >= 1.0 - tolerance
        predicate += ", alpha_0 >= 1"
    return _predicate("alpha_range", subject, holds, predicate, measured=alpha0, tolerance=tolerance)


def check_scalar_limit(analysis: MetricAnalysis, *, tolerance: float = 0.03) -> CheckResult:
    """r^2 times the bending of u at r = 1e3 against (n-2) alpha_0 - (n-2)/2 alpha_0^2."""
    subject = _metric_subject(analysis)
    if analysis.curvature is None or not _is_normal(analysis):
        return _skip("scalar_limit", subject, "needs a normal metric")
    n = analysis.metric.n
    alpha0 = analysis.curvature.alpha0
    values = scalar_limit(analysis.metric, BLOWDOWN_RADII)
    return _compare(
        "scalar_limit",
        subject,
        (n - 2) * alpha0 - 0.5 * (n - 2) * alpha0**2,
        float(values[-1]),
        tolerance,
        band=(float(np.min(values)), float(np.max(values))),
    )


def metric_checks(analysis: MetricAnalysis, tolerances: Mapping[str, float] | None = None) -> list[CheckResult]:
    """Every per-metric check, in a fixed order."""
    tolerances = tolerances or {}
    blowdown = tuple(
        tolerances.get(check_id, default)
        for check_id, default in zip(("blowdown_laplacian", "blowdown_gradient", "blowdown_log"), (0.02, 0.02, 0.05))
    )
    return [
        *check_blowdown_limits(analysis, tolerances=blowdown),
        check_cohn_vossen(analysis, **_tolerance(tolerances, "cohn_vossen")),
        check_tau_formula(analysis, **_tolerance(tolerances, "tau_formula")),
        check_h_theorem(analysis, **_tolerance(tolerances, "h_theorem")),
        check_h_degree(analysis),
        check_scalar_conditional(analysis),
        check_alpha_range(analysis, **_tolerance(tolerances, "alpha_range")),
        check_scalar_limit(analysis, **_tolerance(tolerances, "scalar_limit")),
    ]


# =============================================================================
# Operator checks
# =============================================================================


def check_greens_property(f: RadialProfile, n: int, *, tolerance: float = 1e-2) -> CheckResult:
    """Max relative residual of (-Delta)^{n/2} L(f) against f, n in {2, 4}."""
    subject = _profile_subject(f, n)
    try:
        residual = greens_property_check(f, default_grid(), n)
    except UnsupportedCheck as e:
        return _skip("greens_property", subject, str(e))
    return _compare("greens_property", subject, 0.0, residual.max_relative_residual, tolerance)


def check_halflap_oracle(f: RadialProfile, n: int = 3, *, tolerance: float = 1e-4) -> CheckResult:
    """Principal-value half-Laplacian against the Fourier oracle, relative to the oracle's peak."""
    oracle = halflap_fourier_oracle(f, ORACLE_RADII, n)
    pv = half_laplacian(f, RadialGrid.explicit(ORACLE_RADII), n).values
    measured = float(np.max(np.abs(pv - oracle)) / np.max(np.abs(oracle)))
    return _compare(
        "halflap_oracle",
        _profile_subject(f, n),
        0.0,
        measured,
        tolerance,
        notes=(f"r in [{ORACLE_RADII[0]:g}, {ORACLE_RADII[-1]:g}]",),
    )


def check_halflap_composition(f: RadialProfile, n: int = 3, *, tolerance: float = 1e-3) -> CheckResult:
    """
    Apply the half-Laplacian twice and compare with -Delta f.

    The first pass is tabulated on [1e-3, 1e2]; beyond, it follows
    -C(n) (int f dx) r^{-(n+1)}.
    """
    nodes = np.concatenate([[0.0], np.geomspace(1e-3, 1e2, 241)])
    constant = HalfLapConfig.for_dimension(n).normalization_constant
    tail = TailModel(TailKind.POWER, -(n + 1.0), -constant * alpha_of(f, n).integral)
    inner = half_laplacian_profile(f, n, nodes, tail=tail)
    radii = ORACLE_RADII
    twice = half_laplacian(inner, RadialGrid.explicit(radii), n).values
    target = -radial_laplacian(f, radii, n)
    measured = float(np.max(np.abs(twice - target)) / np.max(np.abs(target)))
    return _compare("halflap_composition", _profile_subject(f, n), 0.0, measured, tolerance)


def check_area_law(beta: float, n: int = 3, *, tolerance: float = 0.01) -> CheckResult:
    """Total Q of u = r^2 - beta log(1 + r^2) against (n-1)! |S^n| beta, relative."""
    metric = ConformalMetric(n, builtin_profile("nonnormal", {"beta": beta}))
    dims = dimension_constants(n)
    predicted = dims.factorial_n_minus_1 * dims.sphere_volume_n * beta
    return _compare(
        "area_law", _metric_subject_of(metric), predicted, total_q(metric).integral, tolerance, relative=True
    )


def check_scalar_spot(
    metric: ConformalMetric, expected: float, radius: float | None = None, *, tolerance: float = 1e-8
) -> CheckResult:
    """R_g at one radius, or its worst deviation over [1e-3, 1e2] when radius is None."""
    if radius is None:
        values = scalar_curvature(metric, SPOT_RADII)
        measured = float(values[np.argmax(np.abs(values - expected))])
        notes = (_span(SPOT_RADII),)
    else:
        measured = scalar_curvature(metric, float(radius))
        notes = (f"r = {radius:g}",)
    return _compare("scalar_spot", _metric_subject_of(metric), expected, measured, tolerance, notes=notes)


def _metric_subject_of(metric: ConformalMetric) -> str:
    return f"{metric.u.name} n={metric.n}"


# =============================================================================
# Registry and suite
# =============================================================================

CheckRunner = Callable[[int, Mapping[str, object], Mapping[str, float]], list[CheckResult]]


def _tolerance(tolerances: Mapping[str, float], check_id: str) -> dict[str, float]:
    return {"tolerance": float(tolerances[check_id])} if check_id in tolerances else {}


def _metric_params(params: Mapping[str, object]) -> tuple[str, dict[str, object]]:
    rest = dict(params)
    family = str(rest.pop("family", "flat"))
    return family, rest


def _run_farfield(n, params, tolerances):
    return [check_farfield(density_from_params(n, params), n, **_tolerance(tolerances, "farfield"))]


def _run_ball_averages(n, params, tolerances):
    f = density_from_params(n, params)
    potential = potential_profile(f, n)
    parameter = params.get("parameter")
    modes = [str(params["mode"])] if "mode" in params else list(BALL_MODES)
    return [
        check_ball_averages(
            f,
            n,
            mode,
            None if parameter is None else float(parameter),
            potential=potential,
            **_tolerance(tolerances, "ball_averages"),
        )
        for mode in modes
    ]


def _run_shell_exponent(n, params, tolerances):
    f = density_from_params(n, params)
    return [check_shell_exponent(f, n, **_tolerance(tolerances, "shell_exponent"))]


def _run_line_integral(n, params, tolerances):
    f = density_from_params(n, params)
    return [check_line_integral(f, n, **_tolerance(tolerances, "line_integral"))]


def _run_mass_bound(n, params, tolerances):
    f = density_from_params(n, params)
    return [check_mass_bound(f, n, **_tolerance(tolerances, "mass_bound"))]


def _run_incompleteness(n, params, tolerances):
    return [check_incompleteness(density_from_params(n, params), n)]


def _run_metric(n, params, tolerances):
    family, rest = _metric_params(params)
    return metric_checks(analyze_metric(build_metric(n, family, rest)), tolerances)


def _run_greens(n, params, tolerances):
    family, rest = _metric_params(params)
    f = density_from_params(n, rest) if family == "density" else builtin_profile(family, rest)
    return [check_greens_property(f, n, **_tolerance(tolerances, "greens_property"))]


def _run_halflap(n, params, tolerances):
    f = builtin_profile("gaussian", {"amplitude": float(params.get("amplitude", 1.0))})
    return [
        check_halflap_oracle(f, n, **_tolerance(tolerances, "halflap_oracle")),
        check_halflap_composition(f, n, **_tolerance(tolerances, "halflap_composition")),
    ]


def _run_area_law(n, params, tolerances):
    return [check_area_law(float(params["beta"]), n, **_tolerance(tolerances, "area_law"))]


def _run_scalar_spot(n, params, tolerances):
    rest = dict(params)
    expected = float(rest.pop("expected"))
    radius = rest.pop("radius", None)
    family, rest = _metric_params(rest)
    metric = build_metric(n, family, rest)
    return [
        check_scalar_spot(
            metric, expected, None if radius is None else float(radius), **_tolerance(tolerances, "scalar_spot")
        )
    ]


@dataclass
class CheckConfig:
    """Configuration for a suite check.

    Attributes:
        name: Check name used in suite configs
        run: (n, params, tolerances) -> results
        matrix: Default (n, params) cases
    """

    name: str
    run: CheckRunner
    matrix: list[tuple[int, dict[str, object]]]


# Central check registry - add new checks here
CHECKS: list[CheckConfig] = [
    CheckConfig(
        "farfield",
        _run_farfield,
        [
            (3, {"alpha": 0.5}),
            (3, {"alpha": -0.3}),
            (3, {"density": "dipole", "alpha": 0.0}),
            (2, {"alpha": 0.5}),
            (4, {"alpha": 0.5}),
            (5, {"alpha": 0.5}),
        ],
    ),
    CheckConfig("ball_averages", _run_ball_averages, [(3, {"alpha": 0.4})]),
    CheckConfig(
        "shell_exponent",
        _run_shell_exponent,
        [(3, {"alpha": 0.0}), (3, {"alpha": 0.4}), (3, {"density": "sphere", "alpha": 2.0})],
    ),
    CheckConfig("line_integral", _run_line_integral, [(3, {"alpha": 0.5}), (3, {"alpha": 1.2})]),
    CheckConfig("mass_bound", _run_mass_bound, [(3, {"alpha": 0.5})]),
    CheckConfig("incompleteness", _run_incompleteness, [(3, {"alpha": 1.2})]),
    CheckConfig(
        "metric",
        _run_metric,
        [
            (2, {"family": "flat"}),
            (3, {"family": "flat"}),
            (4, {"family": "flat"}),
            (5, {"family": "flat"}),
            (3, {"family": "sphere"}),
            (4, {"family": "sphere"}),
            (3, {"family": "nonnormal", "beta": 1.0}),
            (3, {"family": "monomial", "k": 1}),
            (5, {"family": "monomial", "k": 1}),
            (5, {"family": "monomial", "k": 2}),
            (3, {"family": "potential", "density": "bump", "alpha": 0.25}),
            (3, {"family": "potential", "density": "bump", "alpha": 0.5}),
            (3, {"family": "potential", "density": "bump", "alpha": 0.75}),
            (3, {"family": "potential", "density": "sphere", "alpha": 1.0}),
        ],
    ),
    CheckConfig("greens_property", _run_greens, [(2, {"family": "density", "alpha": 0.5}), (4, {"family": "gaussian"})]),
    CheckConfig("halflap", _run_halflap, [(3, {})]),
    CheckConfig("area_law", _run_area_law, [(3, {"beta": 0.25}), (3, {"beta": 0.5}), (3, {"beta": 1.0})]),
    CheckConfig(
        "scalar_spot",
        _run_scalar_spot,
        [
            (3, {"family": "sphere", "expected": 6.0}),
            (3, {"family": "monomial", "k": 1, "radius": 0.0, "expected": -24.0}),
        ],
    ),
]

CHECK_NAMES: dict[str, CheckConfig] = {c.name: c for c in CHECKS}


def get_check_by_name(name: str) -> CheckConfig | None:
    """Check config or None if not found."""
    return CHECK_NAMES.get(name)


@dataclass(frozen=True)
class SuiteEntry:
    """One case of the suite matrix."""

    check: str
    n: int
    params: dict[str, object] = field(default_factory=dict)


@dataclass
class SuiteConfig:
    """Suite matrix, tolerance overrides and parallelism."""

    entries: list[SuiteEntry]
    tolerances: dict[str, float] = field(default_factory=dict)
    max_workers: int = DEFAULT_MAX_WORKERS

    def restricted(self, dimensions: set[int] | None = None, checks: set[str] | None = None) -> "SuiteConfig":
        """Entries whose dimension and check are both selected (None selects all)."""
        entries = [
            e
            for e in self.entries
            if (dimensions is None or e.n in dimensions) and (checks is None or e.check in checks)
        ]
        return SuiteConfig(entries, dict(self.tolerances), self.max_workers)


def default_matrix() -> list[SuiteEntry]:
    """Every registered check over its default cases."""
    return [SuiteEntry(c.name, n, dict(params)) for c in CHECKS for n, params in c.matrix]


def default_suite() -> SuiteConfig:
    return SuiteConfig(default_matrix())


@dataclass
class SuiteReport:
    """Suite results in matrix order."""

    results: list[CheckResult]
    entries: int
    duration: float
    tolerances: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.status == "pass")

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if r.status == "fail")

    @property
    def skipped(self) -> int:
        return sum(1 for r in self.results if r.skipped)

    @property
    def numerical_failures(self) -> int:
        return sum(1 for r in self.results if r.numerical)

    @property
    def ok(self) -> bool:
        return self.failed == 0


def _run_entry(entry: SuiteEntry, tolerances: Mapping[str, float]) -> list[CheckResult]:
    config = get_check_by_name(entry.check)
    if config is None:
        raise InvalidSpec(f"unknown check '{entry.check}'")
    try:
        return config.run(entry.n, entry.params, tolerances)
    except UnsupportedCheck as e:
        return [_skip(entry.check, f"n={entry.n} {entry.params}", str(e))]
    except (InvalidSpec, DomainError):
        raise
    except NumericalError as e:
        _logger.warning("check %s n=%d %s aborted: %s", entry.check, entry.n, entry.params, e)
        subject = f"n={entry.n} {entry.params}"
        note = f"{type(e).__name__}: {e}"
        return [CheckResult(entry.check, subject, None, None, 0.0, False, notes=(note,), numerical=True)]
    except QCurvError as e:
        _logger.warning("check %s n=%d %s failed: %s", entry.check, entry.n, entry.params, e)
        subject = f"n={entry.n} {entry.params}"
        return [
            CheckResult(entry.check, subject, None, None, 0.0, False, notes=(f"{type(e).__name__}: {e}",))
        ]


def _run_check_worker(args: tuple) -> tuple[int, list[CheckResult]]:
    """
    Worker function for running one suite entry.

    Must be defined at module level to be picklable for ProcessPoolExecutor.

    Args:
        args: (index, entry, tolerances)

    Returns:
        (index, results) so the caller can restore matrix order.
    """
    index, entry, tolerances = args
    return index, _run_entry(entry, tolerances)


def run_suite(
    config: SuiteConfig, *, progress_callback: Callable[[int, int], None] | None = None
) -> SuiteReport:
    """
    Run every entry of the suite matrix.

    Entries run in parallel (max_workers > 1) or in-process; results are returned in
    matrix order either way.

    Raises:
        InvalidSpec: An entry names an unknown check or has bad parameters
    """
    for entry in config.entries:
        if get_check_by_name(entry.check) is None:
            raise InvalidSpec(f"unknown check '{entry.check}'")
    start = time.perf_counter()
    total = len(config.entries)
    work_items = [(i, entry, dict(config.tolerances)) for i, entry in enumerate(config.entries)]
    collected: dict[int, list[CheckResult]] = {}
    completed = 0

    if config.max_workers <= 1 or total <= 1:
        for item in work_items:
            index, results = _run_check_worker(item)
            collected[index] = results
            completed += 1
            if progress_callback:
                progress_callback(completed, total)
    else:
        with ProcessPoolExecutor(max_workers=config.max_workers) as executor:
            futures = {executor.submit(_run_check_worker, item): item[0] for item in work_items}
            for future in as_completed(futures):
                index, results = future.result()
                collected[index] = results
                completed += 1
                if progress_callback:
                    progress_callback(completed, total)

    results = [r for i in range(total) for r in collected[i]]
    report = SuiteReport(results, total, time.perf_counter() - start, dict(config.tolerances))
    _logger.info("suite: %d results, %d failed, %d skipped", len(results), report.failed, report.skipped)
    return report
