"""Polynomial part P = u - L(Q e^{nu}), normality verdicts and lower-bound diagnostics.

Only the radial part of P is visible here: a non-radial homogeneous component of P
cannot be detected from a radial conformal factor.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.common.config import DECOMPOSITION_CONFIG, FIT_CONFIG
from src.common.logging import get_logger
from src.qcurv.curvature import ScalarSign, ScalarSignReport, density_profile, scalar_sign_profile
from src.qcurv.entropy import EntropyEstimate, tau_estimate, volume_curve
from src.qcurv.numerics import RadialGrid, default_grid, fit_even_polynomial
from src.qcurv.potential import log_potential
from src.qcurv.profiles import ConformalMetric, RadialProfile

_logger = get_logger(__name__)

_cfg = DECOMPOSITION_CONFIG

RADIAL_SCOPE_NOTE = "radial scope: non-radial homogeneous parts of P are not detectable"


class Verdict(str, Enum):
    NORMAL = "normal"
    NON_NORMAL = "non-normal"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """P on the grid, its even-polynomial fit and the normality verdict."""

    grid: RadialGrid
    p_samples: np.ndarray
    potential_samples: np.ndarray  # L(Q e^{nu}) on the grid
    coefficients: tuple[float, ...]  # c_0, c_2, ...
    degree: int
    residual_rms: float
    spread: float  # max P - min P
    verdict: Verdict
    lower_bound_margin: float | None = None
    notes: list[str] = field(default_factory=lambda: [RADIAL_SCOPE_NOTE])


def max_polynomial_degree(n: int) -> int:
    """Largest even integer <= n - 1."""
    return (n - 1) // 2 * 2


def _significant_degree(coefficients: tuple[float, ...], r_max: float, p_scale: float) -> int:
    degree = 0
    for j, c in enumerate(coefficients):
        if j and abs(c) * r_max ** (2 * j) > _cfg.theta * (1.0 + p_scale):
            degree = 2 * j
    return degree


def polynomial_part(
    metric: ConformalMetric, grid: RadialGrid | None = None, density: RadialProfile | None = None
) -> DecompositionResult:
    """
    Sample P = u - L(Q e^{nu}) and fit its even-polynomial structure.

    A coefficient c_{2j} counts when |c_{2j}| r_max^{2j} > theta (1 + max|P|).

    Args:
        metric: Conformal metric
        grid: Analysis grid (default from config)
        density: Q e^{nu} profile, recomputed when omitted
    """
    grid = grid or default_grid()
    n = metric.n
    if density is None:
        density = density_profile(metric, grid)[1]
    r = grid.nodes
    potential = log_potential(density, r, n)
    p = metric.u(r) - potential

    fit = fit_even_polynomial(r, p, max_polynomial_degree(n))
    p_scale = float(np.max(np.abs(p)))
    degree = _significant_degree(fit.coefficients, grid.r_max, p_scale)
    spread = float(np.ptp(p))
    u_scale = float(np.max(np.abs(metric.u(r))))

    if fit.residual_rms > 1e-2 * (1.0 + p_scale):
        verdict = Verdict.INCONCLUSIVE
    elif degree > 0:
        verdict = Verdict.NON_NORMAL
    elif spread <= _cfg.normal_spread * (1.0 + u_scale):
        verdict = Verdict.NORMAL
    else:
        verdict = Verdict.INCONCLUSIVE
    _logger.info("%s: P degree %d, spread %.3g, verdict %s", metric.u.name, degree, spread, verdict.value)
    return DecompositionResult(
        grid=grid,
        p_samples=p,
        potential_samples=potential,
        coefficients=fit.coefficients,
        degree=degree,
        residual_rms=fit.residual_rms,
        spread=spread,
        verdict=verdict,
    )


@dataclass(frozen=True)
class NormalityReport:
    """Verdict with its entropy cross-check."""

    verdict: Verdict
    degree: int
    tau: EntropyEstimate
    consistent: bool  # tau diverging exactly when the verdict is non-normal
    decomposition: DecompositionResult


def normality_test(
    metric: ConformalMetric,
    grid: RadialGrid | None = None,
    *,
    decomposition: DecompositionResult | None = None,
    tau: EntropyEstimate | None = None,
) -> NormalityReport:
    """Normal iff P has degree 0 and is constant within tolerance; tau must agree."""
    decomposition = decomposition or polynomial_part(metric, grid)
    tau = tau or tau_estimate(volume_curve(metric))
    verdict = decomposition.verdict
    consistent = verdict == Verdict.INCONCLUSIVE or tau.diverging == (verdict == Verdict.NON_NORMAL)
    if not consistent:
        _logger.warning("%s: verdict %s but tau diverging=%s", metric.u.name, verdict.value, tau.diverging)
    return NormalityReport(verdict, decomposition.degree, tau, consistent, decomposition)


@dataclass(frozen=True)
class LowerBoundReport:
    """
    Fitted lower-bound constants.

    c_p: smallest C >= 0 with P >= -C log(r + 2) on the grid
    c_u: smallest C with u >= -2 log(r + 1) - C on the grid
    Margins use the constants fitted on the head of the grid; a negative margin means
    the required constant keeps growing over the tail.
    """

    c_p: float
    c_u: float
    p_margin: float
    u_margin: float
    hypothesis: bool  # R_g bounded below on the grid
    p_violation: bool
    u_violation: bool
    note: str = "fitted constants are grid minima, lower bounds for the existential constants"


def _head_size(count: int) -> int:
    return max(1, count - max(FIT_CONFIG.min_points, int(np.ceil(FIT_CONFIG.window_fraction * count))))


def lower_bound_checks(
    metric: ConformalMetric,
    decomposition: DecompositionResult | None = None,
    sign: ScalarSignReport | None = None,
) -> LowerBoundReport:
    """Fit both lower-bound constants; violations are flagged only when R_g is bounded below."""
    decomposition = decomposition or polynomial_part(metric)
    grid = decomposition.grid
    sign = sign or scalar_sign_profile(metric, grid)
    r = grid.nodes
    p = decomposition.p_samples
    u = metric.u(r)

    p_need = -p / np.log(r + 2.0)
    u_need = -2.0 * np.log(r + 1.0) - u
    head = _head_size(len(r))

    c_p = max(0.0, float(np.max(p_need)))
    c_u = float(np.max(u_need))
    c_p_head = max(0.0, float(np.max(p_need[:head])))
    c_u_head = float(np.max(u_need[:head]))
    p_margin = float(np.min(p + c_p_head * np.log(r + 2.0)))
    u_margin = float(np.min(u + 2.0 * np.log(r + 1.0) + c_u_head))

    hypothesis = sign.classification != ScalarSign.UNBOUNDED_BELOW
    growth = _cfg.bound_growth
    p_violation = hypothesis and c_p > c_p_head * (1.0 + growth) + growth
    u_violation = hypothesis and c_u > c_u_head + growth * (1.0 + abs(c_u_head))
    return LowerBoundReport(c_p, c_u, p_margin, u_margin, hypothesis, p_violation, u_violation)
