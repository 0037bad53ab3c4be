"""Metric volume of Euclidean balls, the volume entropies tau and h, and ray distances."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from src.common.config import COMPLETENESS_CONFIG, ENTROPY_CONFIG, GRID_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import DomainError
from src.qcurv.numerics import (
    FitResult,
    RadialGrid,
    dimension_constants,
    fit_loglog_slope,
    fit_semilog_slope,
    geometric_breakpoints,
    integrate_segments,
    log_integral_exp,
)
from src.qcurv.profiles import ConformalMetric, TailKind

_logger = get_logger(__name__)

_cfg = ENTROPY_CONFIG

# Beyond this log V, V itself is not materialized
_LOG_OVERFLOW = 700.0


def volume_grid() -> RadialGrid:
    """Default volume radii: [1e-3, 1e6], 181 geometric nodes."""
    return RadialGrid.geometric(GRID_CONFIG.r_min, GRID_CONFIG.volume_r_max, GRID_CONFIG.volume_count)


@dataclass(frozen=True, eq=False)
class VolumeCurve:
    """V_g(B_R) on geometric radii, kept in log space."""

    radii: np.ndarray
    log_volumes: np.ndarray
    n: int

    @property
    def volumes(self) -> np.ndarray:
        """V itself; +inf where log V exceeds the overflow threshold."""
        out = np.full_like(self.log_volumes, np.inf)
        small = self.log_volumes <= _LOG_OVERFLOW
        out[small] = np.exp(self.log_volumes[small])
        return out


def volume_curve(metric: ConformalMetric, radii: RadialGrid | Sequence[float] | None = None) -> VolumeCurve:
    """
    V(R) = |S^{n-1}| int_0^R e^{n u(r)} r^{n-1} dr at each radius.

    Each shell is integrated once in log space and the shells are accumulated with a
    running log-sum-exp, so volumes growing like exp(R^k) never overflow.

    Raises:
        DomainError: Fewer than 12 radii or a non-geometric grid
    """
    grid = radii if isinstance(radii, RadialGrid) else volume_grid() if radii is None else None
    if grid is None:
        nodes = np.asarray(radii, dtype=np.float64)
        grid = RadialGrid(nodes, "geometric")
    if grid.spacing_rule != "geometric" or len(grid) < 12:
        raise DomainError("volume curve needs a geometric grid with at least 12 radii")

    n = metric.n
    u = metric.u

    def exponent(r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return n * u(r) + (n - 1) * np.log(r)

    edges = np.concatenate([[0.0], grid.nodes])
    shells = np.array(
        [
            log_integral_exp(exponent, float(lo), float(hi), cutoff=_cfg.shell_cutoff)
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
    )
    log_volumes = np.logaddexp.accumulate(shells) + math.log(dimension_constants(n).sphere_volume_n_minus_1)
    _logger.debug("volume curve %s: log V(R_max) = %.6g", u.name, log_volumes[-1])
    return VolumeCurve(radii=grid.nodes, log_volumes=log_volumes, n=n)


@dataclass(frozen=True)
class EntropyEstimate:
    """Volume entropy estimate; value is +inf when the growth diverges."""

    kind: str  # "tau" or "h"
    value: float
    raw: float
    fit: FitResult | None
    diverging: bool
    snapped: int | None = None  # nearest even integer for h, when within tolerance
    inconclusive: bool = False
    local_slopes: tuple[float, ...] = field(default=())
    note: str = ""


def _dyadic_slopes(curve: VolumeCurve, windows: int = 4) -> tuple[float, ...]:
    """Slopes of log V against log R over [R/2, R] for R = R_max, R_max/2, ... (innermost first)."""
    lr = np.log(curve.radii)
    slopes = []
    top = lr[-1]
    for j in range(windows):
        hi = top - j * math.log(2.0)
        mask = (lr >= hi - math.log(2.0) - 1e-12) & (lr <= hi + 1e-12)
        if np.count_nonzero(mask) < 2:
            break
        slopes.append(float(np.polyfit(lr[mask], curve.log_volumes[mask], 1)[0]))
    return tuple(reversed(slopes))


def tau_estimate(curve: VolumeCurve) -> EntropyEstimate:
    """
    tau = lim sup log V / log |B_R|, as the trailing-window slope of log V over n log R.

    Diverging when the last local slope exceeds 10 n, or local slopes grow by more than
    20% per doubling of R.
    """
    n = curve.n
    fit = fit_semilog_slope(curve.radii, curve.log_volumes)
    local = _dyadic_slopes(curve)
    growing = (
        len(local) >= 2
        and all(s > 1e-3 for s in local)
        and all(b > (1.0 + _cfg.divergence_growth) * a for a, b in zip(local[:-1], local[1:]))
    )
    diverging = bool(local and local[-1] > _cfg.divergence_slope_factor * n) or growing
    raw = fit.slope / n
    if diverging:
        return EntropyEstimate(
            "tau", math.inf, raw, fit, True, local_slopes=local, note="log V grows faster than any power of R"
        )
    inconclusive = fit.stability > 0.1 * n
    note = "trailing slopes oscillate" if inconclusive else ""
    return EntropyEstimate("tau", raw, raw, fit, False, inconclusive=inconclusive, local_slopes=local, note=note)


def h_estimate(curve: VolumeCurve, tau: EntropyEstimate | None = None) -> EntropyEstimate:
    """
    h = inf{s : log V = O(R^s)}: 0 for polynomial growth, else the slope of log log V against log R.

    The raw slope is reported together with its nearest even integer.
    """
    tau = tau or tau_estimate(curve)
    if not tau.diverging:
        return EntropyEstimate("h", 0.0, 0.0, None, False, snapped=0, note="polynomial volume growth")
    mask = curve.log_volumes > _cfg.log_volume_floor
    if np.count_nonzero(mask[-8:]) < 8 or np.count_nonzero(mask) < 8:
        return EntropyEstimate("h", 0.0, 0.0, None, False, snapped=0, note="log V stays below the floor")
    fit = fit_loglog_slope(curve.radii[mask], curve.log_volumes[mask])
    raw = fit.slope
    nearest = 2 * round(raw / 2.0)
    snapped = int(nearest) if abs(raw - nearest) <= _cfg.snap_tolerance else None
    return EntropyEstimate("h", raw, raw, fit, True, snapped=snapped)


class Completeness(str, Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RayDistance:
    """Distance along a ray and the completeness verdict it implies."""

    radius: float
    distance: float  # int_0^R e^{u} dr
    completeness: Completeness
    distance_to_infinity: float  # +inf unless incomplete


def _classify(metric: ConformalMetric) -> Completeness:
    tail = metric.u.tail
    margin = COMPLETENESS_CONFIG.margin
    if not tail.trusted:
        return Completeness.INCONCLUSIVE
    if tail.kind == TailKind.LOG:
        c = tail.leading_coefficient
        if c > -1.0 + margin:
            return Completeness.COMPLETE
        if c < -1.0 - margin:
            return Completeness.INCOMPLETE
        return Completeness.INCONCLUSIVE
    if tail.kind == TailKind.POLYNOMIAL and tail.leading_coefficient < 0.0:
        return Completeness.INCOMPLETE
    return Completeness.COMPLETE


def ray_distance(metric: ConformalMetric, radius: float) -> RayDistance:
    """
    D(R) = int_0^R e^{u(r)} dr along a ray, with completeness from the tail of u.

    For radial metrics the ray realizes the distance to infinity, so the metric is
    complete exactly when D diverges.
    """
    if radius <= 0:
        raise DomainError(f"ray distance needs R > 0, got {radius}")
    u = metric.u
    log_distance = log_integral_exp(u, 0.0, float(radius))
    distance = math.exp(log_distance) if log_distance <= _LOG_OVERFLOW else math.inf
    completeness = _classify(metric)
    at_infinity = math.inf
    if completeness == Completeness.INCOMPLETE:
        at_infinity, _ = integrate_segments(
            lambda r: math.exp(u(r)),
            [0.0, *geometric_breakpoints(1e-3, 1e5), np.inf],
            label="ray_distance",
        )
    return RayDistance(radius=float(radius), distance=distance, completeness=completeness, distance_to_infinity=at_infinity)
