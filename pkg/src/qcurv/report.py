"""Report schema and renderer for the analyze and verify commands."""

from dataclasses import dataclass, field

import numpy as np

from src.common.config import FIT_CONFIG
from src.qcurv.analysis import MetricAnalysis
from src.qcurv.decomposition import RADIAL_SCOPE_NOTE
from src.qcurv.specfile import SCHEMA_VERSION, Document, MetricSpec, Value, render_document, spec_document
from src.qcurv.verify import CheckResult, SuiteReport

WINDOW_NOTE = "lim sup estimated as the trailing-window slope"
PROXY_NOTE = "decay and completeness flags are profile-level proxies"


@dataclass
class Report:
    """A structured text document; values carry their band or tolerance."""

    command: str
    sections: Document = field(default_factory=dict)

    def render(self) -> str:
        root = {"schema_version": SCHEMA_VERSION, "command": self.command}
        return render_document({"": root, **{k: v for k, v in self.sections.items() if k}}, precise=False)


def _num(value) -> Value:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _band(band) -> Value:
    if band is None:
        return "none"
    return [float(band[0]), float(band[1])]


def _window_section() -> dict[str, Value]:
    return {
        "window_fraction": FIT_CONFIG.window_fraction,
        "min_points": FIT_CONFIG.min_points,
        "tail_stability": FIT_CONFIG.tail_stability,
        "note": WINDOW_NOTE,
    }


def _check_section(result: CheckResult) -> dict[str, Value]:
    section: dict[str, Value] = {
        "check_id": result.check_id,
        "status": result.status,
        "subject": result.subject,
        "anchor": result.anchor,
        "predicted": _num(result.predicted) if result.predicate == "" else result.predicate,
        "measured": _num(result.measured),
        "band": _band(result.band),
        "tolerance": _num(result.tolerance),
    }
    if result.notes:
        section["notes"] = list(result.notes)
    if result.numerical:
        section["numerical_failure"] = True
    return section


def add_checks(report: Report, results: list[CheckResult]) -> None:
    width = max(3, len(str(len(results))))
    for i, result in enumerate(results, start=1):
        report.sections[f"check.{i:0{width}d}"] = _check_section(result)


def analysis_report(spec: MetricSpec, analysis: MetricAnalysis, checks: list[CheckResult]) -> Report:
    """Spec echo, curvature, entropy and decomposition summaries, checks and warnings."""
    report = Report("analyze")
    echo = spec_document(spec)
    report.sections["spec"] = echo["metric"] | echo["grid"] | echo["quadrature"]
    if echo["params"]:
        report.sections["spec.params"] = echo["params"]
    report.sections["spec.analysis"] = echo["analysis"]
    report.sections["window"] = _window_section()

    curvature = analysis.curvature
    if curvature is not None:
        sign = curvature.sign
        report.sections["curvature"] = {
            "total_q": curvature.total_q,
            "alpha0": curvature.alpha0,
            "quadrature_tolerance": spec.tolerance,
            "min_scalar": sign.min_scalar,
            "min_scalar_radius": sign.min_radius,
            "scalar_sign": sign.classification.value,
            "scalar_sign_radius": _num(sign.scalar_sign_radius),
            "tail_min_scalar": sign.tail_min,
            "q_underflow": curvature.q_underflow,
            "note": "min_scalar is a grid minimum; near infinity means beyond the last sign change on the grid",
        }

    if analysis.tau is not None:
        tau, h, ray, volume = analysis.tau, analysis.h, analysis.ray, analysis.volume
        n = analysis.metric.n
        entropy: dict[str, Value] = {
            "tau": tau.value,
            "tau_raw": tau.raw,
            "tau_band": _band(None if tau.fit is None else (tau.fit.band[0] / n, tau.fit.band[1] / n)),
            "tau_diverging": tau.diverging,
            "tau_inconclusive": tau.inconclusive,
            "tau_local_slopes": [float(s) for s in tau.local_slopes],
            "h": h.value,
            "h_raw": h.raw,
            "h_band": _band(None if h.fit is None else h.fit.band),
            "h_snapped": _num(h.snapped),
            "volume_r_max": float(volume.radii[-1]),
            "log_volume_r_max": float(volume.log_volumes[-1]),
            "ray_radius": ray.radius,
            "ray_distance": ray.distance,
            "completeness": ray.completeness.value,
            "distance_to_infinity": ray.distance_to_infinity,
            "note": PROXY_NOTE,
        }
        report.sections["entropy"] = entropy

    decomposition = analysis.decomposition
    if decomposition is not None:
        section: dict[str, Value] = {
            "verdict": decomposition.verdict.value,
            "degree": decomposition.degree,
            "coefficients": [float(c) for c in decomposition.coefficients],
            "residual_rms": decomposition.residual_rms,
            "spread": decomposition.spread,
            "lower_bound_margin": _num(decomposition.lower_bound_margin),
            "note": RADIAL_SCOPE_NOTE,
        }
        if analysis.normality is not None:
            section["tau_consistent"] = analysis.normality.consistent
        bounds = analysis.lower_bounds
        if bounds is not None:
            section |= {
                "c_p": bounds.c_p,
                "c_u": bounds.c_u,
                "u_margin": bounds.u_margin,
                "bound_hypothesis": bounds.hypothesis,
                "p_violation": bounds.p_violation,
                "u_violation": bounds.u_violation,
                "bound_note": bounds.note,
            }
        report.sections["decomposition"] = section

    add_checks(report, checks)
    report.sections["summary"] = _summary(checks) | {"warnings": list(analysis.warnings)}
    return report


def _summary(results: list[CheckResult]) -> dict[str, Value]:
    return {
        "checks": len(results),
        "passed": sum(1 for r in results if r.status == "pass"),
        "failed": sum(1 for r in results if r.status == "fail"),
        "skipped": sum(1 for r in results if r.skipped),
    }


def suite_report(suite: SuiteReport) -> Report:
    """Counts, tolerance overrides and every check result in matrix order."""
    report = Report("verify")
    report.sections["suite"] = {"entries": suite.entries} | _summary(suite.results)
    if suite.tolerances:
        report.sections["tolerances"] = dict(sorted(suite.tolerances.items()))
    report.sections["window"] = _window_section()
    add_checks(report, suite.results)
    return report
