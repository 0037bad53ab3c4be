"""Q-curvature density, scalar curvature and the total-Q invariant alpha_0."""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import simpson

from src.common.config import FIT_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import FiniteTotalQViolated, Inconclusive
from src.qcurv.numerics import (
    RadialGrid,
    default_grid,
    dimension_constants,
    geometric_breakpoints,
    integrate_segments,
)
from src.qcurv.operators import OperatorResult, laplacian_profile, polyharmonic, radial_laplacian
from src.qcurv.potential import TotalMass
from src.qcurv.profiles import ConformalMetric, RadialProfile, TailKind, TailModel, fit_tail, sampled_profile

_logger = get_logger(__name__)

# Density tails below this share of the peak are numerical zeros
_NEGLIGIBLE_TAIL = 1e-9


def q_density(metric: ConformalMetric, grid: RadialGrid) -> OperatorResult:
    """Q e^{nu} = (-Delta)^{n/2} u on the grid."""
    return polyharmonic(metric, grid)


def _density_tail(r: np.ndarray, v: np.ndarray) -> TailModel:
    peak = float(np.max(np.abs(v))) if len(v) else 0.0
    last = r >= r[-1] / FIT_CONFIG.tail_decade
    if peak == 0.0 or np.max(np.abs(v[last])) <= _NEGLIGIBLE_TAIL * peak:
        return TailModel(TailKind.COMPACT)
    return fit_tail(r[last], v[last])


def density_profile(metric: ConformalMetric, grid: RadialGrid | None = None) -> tuple[OperatorResult, RadialProfile]:
    """
    Q e^{nu} on the grid and as a profile.

    Even n returns the exact iterated-Laplacian profile. Odd n splines the grid values
    (extended down to r = 1e-3 when the grid starts later) with a fitted tail.
    """
    grid = grid or default_grid()
    n = metric.n
    if n % 2 == 0:
        return q_density(metric, grid), laplacian_profile(metric.u, n // 2, n)
    if grid.r_min > 1e-3:
        head = np.geomspace(1e-3, grid.r_min, 8)[:-1]
        grid = RadialGrid.explicit(np.concatenate([head, grid.nodes]))
    result = q_density(metric, grid)
    tail = _density_tail(grid.nodes, result.values)
    profile = sampled_profile(
        np.column_stack([grid.nodes, result.values]), tail=tail, name=f"(-Δ)^{n}/2[{metric.u.name}]"
    )
    return result, profile


def _bending(metric: ConformalMetric, r: np.ndarray) -> np.ndarray:
    """-Delta u - (n-2)/2 u'^2."""
    n = metric.n
    return -radial_laplacian(metric.u, r, n) - 0.5 * (n - 2) * metric.u(r, 1) ** 2


def scalar_curvature(metric: ConformalMetric, r):
    """
    R_g = 2(n-1) e^{-2u} (-Delta u - (n-2)/2 |grad u|^2).

    The exponential factor is applied in log space so growing u underflows cleanly to 0.
    """
    scalar = np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    bending = _bending(metric, rr)
    out = np.zeros_like(rr)
    nonzero = bending != 0.0
    with np.errstate(over="ignore", under="ignore"):
        out[nonzero] = (
            2.0
            * (metric.n - 1)
            * np.sign(bending[nonzero])
            * np.exp(-2.0 * metric.u(rr[nonzero]) + np.log(np.abs(bending[nonzero])))
        )
    return float(out[0]) if scalar else out


def scalar_limit(metric: ConformalMetric, r):
    """r^2 (-Delta u - (n-2)/2 |grad u|^2), which tends to (n-2) a - (n-2)/2 a^2 for normal metrics."""
    rr = np.asarray(r, dtype=np.float64)
    out = rr**2 * _bending(metric, np.atleast_1d(rr))
    return float(out[0]) if np.ndim(r) == 0 else out


def total_q(metric: ConformalMetric, grid: RadialGrid | None = None) -> TotalMass:
    """
    int Q e^{nu} dx and alpha_0.

    Raises:
        FiniteTotalQViolated: The density tail is not integrable
        Inconclusive: The density tail cannot be fitted
    """
    result, density = density_profile(metric, grid)
    return _integrate_density(metric, result, density)


def _integrate_density(metric: ConformalMetric, result: OperatorResult, density: RadialProfile) -> TotalMass:
    n = metric.n
    dims = dimension_constants(n)
    tail = density.tail
    if not tail.trusted:
        raise Inconclusive(f"Q-curvature density tail of {metric.u.name} is not stable (band {tail.stability:.3g})")
    if not tail.integrable(n):
        raise FiniteTotalQViolated(
            f"Q-curvature density of {metric.u.name} decays like r^{tail.leading_exponent:.3g}, not integrable in R^{n}"
        )

    if density.nodes is None:
        power = n - 1
        radial, _ = integrate_segments(
            lambda s: density(s) * s**power,
            [0.0, *geometric_breakpoints(1e-3, 1e5), np.inf],
            label="total_q",
        )
    else:
        r = result.grid.nodes
        v = result.values
        # s^{n-1} ds = s^n d(log s)
        radial = float(simpson(v * r**n, x=np.log(r)))
        radial += float(v[0]) * r[0] ** n / n
        if tail.kind == TailKind.POWER and not tail.vanishes:
            e = tail.leading_exponent
            radial += -tail.leading_coefficient * r[-1] ** (e + n) / (e + n)
    integral = dims.sphere_volume_n_minus_1 * radial
    return TotalMass(integral=integral, alpha=dims.normalization * integral, n=n)


class ScalarSign(str, Enum):
    NONNEGATIVE = "nonnegative-near-infinity"
    BOUNDED_BELOW = "bounded-below"
    UNBOUNDED_BELOW = "unbounded-below"


@dataclass(frozen=True)
class ScalarSignReport:
    """Sign behaviour of R_g on the grid; "near infinity" means beyond the last sign change."""

    classification: ScalarSign
    min_scalar: float
    min_radius: float
    scalar_sign_radius: float | None  # first radius after the last sign change
    tail_min: float  # min of R_g over the trailing window
    tail_max: float
    values: np.ndarray = field(repr=False)

    @property
    def bounded_away_from_zero(self) -> bool:
        """R_g >= C > 0 near infinity: positive and not decaying over the trailing window."""
        return self.classification == ScalarSign.NONNEGATIVE and self.tail_min > 0.0 and self.tail_min >= 0.5 * self.tail_max


def scalar_sign_profile(metric: ConformalMetric, grid: RadialGrid | None = None) -> ScalarSignReport:
    grid = grid or default_grid()
    values = scalar_curvature(metric, grid.nodes)
    # R_g underflows to zero where u grows; the sign lives in the bending term
    negative = _bending(metric, grid.nodes) < 0.0
    changes = np.nonzero(negative[1:] != negative[:-1])[0]
    sign_radius = float(grid.nodes[changes[-1] + 1]) if len(changes) else None

    start = len(values) - max(FIT_CONFIG.min_points, math.ceil(FIT_CONFIG.window_fraction * len(values)))
    window = values[max(0, start) :]
    finite = np.isfinite(values)
    index = int(np.argmin(np.where(finite, values, -np.inf)))

    if not negative[-1]:
        classification = ScalarSign.NONNEGATIVE
    elif not np.all(np.isfinite(window)) or (np.all(np.diff(window) < 0) and window[-1] < 2.0 * window[0] - 1.0):
        classification = ScalarSign.UNBOUNDED_BELOW
    else:
        classification = ScalarSign.BOUNDED_BELOW
    return ScalarSignReport(
        classification=classification,
        min_scalar=float(values[index]),
        min_radius=float(grid.nodes[index]),
        scalar_sign_radius=sign_radius,
        tail_min=float(np.min(window)),
        tail_max=float(np.max(window)),
        values=values,
    )


@dataclass(frozen=True)
class CurvatureReport:
    """Curvature quantities of a conformal metric on a grid."""

    grid: RadialGrid
    q_density: np.ndarray
    q: np.ndarray
    q_underflow: bool  # Q could not be represented at some radii and was set to 0
    scalar: np.ndarray
    total: TotalMass
    min_scalar: float
    scalar_sign_radius: float | None
    sign: ScalarSignReport
    density: RadialProfile = field(repr=False)

    @property
    def total_q(self) -> float:
        return self.total.integral

    @property
    def alpha0(self) -> float:
        return self.total.alpha


def _q_from_density(metric: ConformalMetric, r: np.ndarray, density: np.ndarray) -> tuple[np.ndarray, bool]:
    q = np.zeros_like(density)
    nonzero = density != 0.0
    exponent = np.log(np.abs(density[nonzero])) - metric.n * metric.u(r[nonzero])
    underflow = bool(np.any(exponent < -745.0))
    with np.errstate(over="ignore", under="ignore"):
        q[nonzero] = np.sign(density[nonzero]) * np.exp(exponent)
    return q, underflow


def curvature_report(metric: ConformalMetric, grid: RadialGrid | None = None) -> CurvatureReport:
    """Q density, Q, R_g, total Q and the scalar sign profile."""
    grid = grid or default_grid()
    result, density = density_profile(metric, grid)
    values = result.values[-len(grid) :]
    q, underflow = _q_from_density(metric, grid.nodes, values)
    if underflow:
        _logger.warning("%s: Q underflows at some radii; reported as 0", metric.u.name)
    total = _integrate_density(metric, result, density)
    sign = scalar_sign_profile(metric, grid)
    _logger.info("%s: total Q %.6g, alpha0 %.6g, min R %.6g", metric.u.name, total.integral, total.alpha, sign.min_scalar)
    return CurvatureReport(
        grid=grid,
        q_density=values,
        q=q,
        q_underflow=underflow,
        scalar=sign.values,
        total=total,
        min_scalar=sign.min_scalar,
        scalar_sign_radius=sign.scalar_sign_radius,
        sign=sign,
        density=density,
    )
