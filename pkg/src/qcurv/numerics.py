"""Numerical substrate: radial grids, quadrature, log-log slope fits, even-polynomial fits and dimensional constants.

Every improper integral in the package goes through the wrappers here so that
budgets, tolerances and failure reporting are uniform.
"""

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma

from src.common.config import FIT_CONFIG, GRID_CONFIG, QUADRATURE_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import DomainError, IllPosedFit, InvalidDimension, PVDivergent, QuadratureFailure

_logger = get_logger(__name__)

_cfg = QUADRATURE_CONFIG
_fit_cfg = FIT_CONFIG

ScalarFunction = Callable[[float], float]

_tolerance_override: ContextVar[float | None] = ContextVar("quadrature_tolerance", default=None)


def default_tolerance() -> float:
    """Absolute quadrature tolerance in effect (config value unless overridden)."""
    override = _tolerance_override.get()
    return _cfg.tolerance if override is None else override


@contextmanager
def quadrature_tolerance(tol: float) -> Iterator[None]:
    """Override the default absolute quadrature tolerance within the block."""
    if not 0 < tol <= 1e-2:
        raise DomainError(f"quadrature tolerance must be in (0, 1e-2], got {tol}")
    token = _tolerance_override.set(float(tol))
    try:
        yield
    finally:
        _tolerance_override.reset(token)


# =============================================================================
# Grids
# =============================================================================


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing positive radii.

    Attributes:
        nodes: Read-only array of radii
        spacing_rule: "geometric" or "explicit"
        ratio: Constant ratio of consecutive nodes for geometric grids
    """

    nodes: np.ndarray
    spacing_rule: str = "explicit"
    ratio: float | None = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or len(nodes) < 8:
            raise DomainError(f"radial grid needs at least 8 nodes, got {nodes.size}")
        if not np.all(np.isfinite(nodes)) or nodes[0] <= 0:
            raise DomainError("radial grid nodes must be finite and strictly positive")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("radial grid nodes must be strictly increasing")
        if self.spacing_rule == "geometric":
            ratios = nodes[1:] / nodes[:-1]
            if not np.allclose(ratios, ratios[0], rtol=1e-12, atol=0.0):
                raise DomainError("geometric grid ratio is not constant")
            object.__setattr__(self, "ratio", float(ratios[0]))
        elif self.spacing_rule != "explicit":
            raise DomainError(f"unknown spacing rule: {self.spacing_rule}")
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def geometric(cls, r_min: float, r_max: float, count: int) -> "RadialGrid":
        """Geometric grid from r_min to r_max with count nodes."""
        if not 0 < r_min < r_max:
            raise DomainError(f"need 0 < r_min < r_max, got [{r_min}, {r_max}]")
        return cls(np.geomspace(r_min, r_max, count), "geometric")

    @classmethod
    def explicit(cls, nodes: Sequence[float]) -> "RadialGrid":
        """Grid from explicit radii."""
        return cls(np.asarray(nodes, dtype=np.float64), "explicit")

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return len(self.nodes)


def default_grid() -> RadialGrid:
    """Analysis grid from the config: [1e-3, 1e4], 241 geometric nodes."""
    return RadialGrid.geometric(GRID_CONFIG.r_min, GRID_CONFIG.r_max, GRID_CONFIG.count)


# =============================================================================
# Dimensional constants
# =============================================================================


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^dim in R^{dim+1}."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / gamma((dim + 1) / 2)


@dataclass(frozen=True)
class DimensionConstants:
    """Closed-form constants of R^n and S^n."""

    n: int
    sphere_volume_n: float  # |S^n|
    sphere_volume_n_minus_1: float  # |S^{n-1}|
    ball_volume: float  # omega_n = |B_1(0)|
    factorial_n_minus_1: int  # (n-1)!
    normalization: float  # 2 / ((n-1)! |S^n|)

    @property
    def potential_factor(self) -> float:
        """|S^{n-1}| * normalization, the radial prefactor of the logarithmic potential."""
        return self.sphere_volume_n_minus_1 * self.normalization

    @property
    def critical_total(self) -> float:
        """(n-1)! |S^n| / 2, the total Q at which alpha equals one."""
        return self.factorial_n_minus_1 * self.sphere_volume_n / 2.0


@lru_cache(maxsize=32)
def _dimension_constants(n: int) -> DimensionConstants:
    s_n = sphere_area(n)
    s_n_minus_1 = sphere_area(n - 1)
    fact = math.factorial(n - 1)
    return DimensionConstants(
        n=n,
        sphere_volume_n=s_n,
        sphere_volume_n_minus_1=s_n_minus_1,
        ball_volume=s_n_minus_1 / n,
        factorial_n_minus_1=fact,
        normalization=2.0 / (fact * s_n),
    )


def dimension_constants(n: int) -> DimensionConstants:
    """
    Constants of dimension n.

    Args:
        n: Dimension, an integer >= 2

    Returns:
        DimensionConstants with |S^n|, |S^{n-1}|, omega_n, (n-1)! and the potential normalization.

    Raises:
        InvalidDimension: n is not an integer >= 2
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidDimension(n)
    return _dimension_constants(int(n))


def validate_dimension(n) -> int:
    """Return n as int or raise InvalidDimension."""
    return dimension_constants(n).n


# =============================================================================
# Quadrature
# =============================================================================


def quad(func: ScalarFunction, a: float, b: float, tol: float | None = None, *, label: str = "quad", **kwargs):
    """
    scipy.integrate.quad with the package budget and loud failures.

    Args:
        func: Integrand
        a, b: Limits (b may be np.inf)
        tol: Absolute tolerance (default from config)
        label: Name used in failure messages
        **kwargs: Passed through (weight, wvar, points)

    Returns:
        (value, error estimate)

    Raises:
        QuadratureFailure: QUADPACK reported a problem and the error bound exceeds the request
    """
    tol = default_tolerance() if tol is None else tol
    result = integrate.quad(
        func,
        a,
        b,
        epsabs=tol,
        epsrel=_cfg.relative_tolerance,
        limit=_cfg.subinterval_limit,
        full_output=1,
        **kwargs,
    )
    value, error = float(result[0]), float(result[1])
    if not math.isfinite(value):
        raise QuadratureFailure(f"{label}: non-finite result on [{a}, {b}]", value, error)
    if len(result) > 3:
        allowed = _cfg.failure_slack * max(tol, _cfg.relative_tolerance * abs(value))
        if error > allowed:
            raise QuadratureFailure(f"{label}: {result[3]}", value, error)
        _logger.debug("%s: accepted with QUADPACK note (%s), error %.3g", label, result[3], error)
    return value, error


def integrate_segments(
    func: ScalarFunction, breakpoints: Sequence[float], tol: float | None = None, *, label: str = "segments"
) -> tuple[float, float]:
    """Integrate over consecutive pieces between sorted breakpoints; the last may be np.inf."""
    tol = default_tolerance() if tol is None else tol
    pieces = [p for p in breakpoints]
    share = tol / max(1, len(pieces) - 1)
    total = 0.0
    error = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi <= lo:
            continue
        value, err = quad(func, lo, hi, share, label=label)
        total += value
        error += err
    return total, error


def geometric_breakpoints(a: float, b: float, ratio: float = 10.0) -> list[float]:
    """Breakpoints a, ..., b spaced geometrically (a > 0) so each piece spans at most one ratio."""
    if a <= 0:
        raise DomainError("geometric breakpoints need a > 0")
    count = max(1, math.ceil(math.log(b / a) / math.log(ratio)))
    return list(np.geomspace(a, b, count + 1))


def integrate_radial(
    f: ScalarFunction, n: int, a: float, b: float, tol: float | None = None, *, points: Sequence[float] | None = None
) -> float:
    """
    Integrate f(r) r^{n-1} dr over [a, b].

    The volume integral of a radial function is |S^{n-1}| times this value.

    Args:
        f: Radial function
        n: Power weight exponent plus one (n=1 gives a plain 1-D integral)
        a, b: 0 <= a < b, b may be np.inf
        tol: Absolute tolerance
        points: Optional interior breakpoints

    Returns:
        The integral.

    Raises:
        DomainError: Invalid interval
        QuadratureFailure: Non-convergence within the evaluation budget
    """
    if not 0 <= a < b:
        raise DomainError(f"need 0 <= a < b, got [{a}, {b}]")
    power = n - 1

    def integrand(r: float) -> float:
        return f(r) * r**power if power else f(r)

    if points is None:
        return quad(integrand, a, b, tol, label="integrate_radial")[0]
    inner = sorted(p for p in points if a < p < b)
    if math.isinf(b):
        head = [a, *inner] if inner else [a]
        if len(head) == 1:
            return quad(integrand, a, b, tol, label="integrate_radial")[0]
        finite, _ = integrate_segments(integrand, head, tol / 2, label="integrate_radial")
        return finite + quad(integrand, head[-1], b, tol / 2, label="integrate_radial")[0]
    return quad(integrand, a, b, tol, points=inner or None, label="integrate_radial")[0]


def integrate_log_singular(
    g: ScalarFunction, s0: float, interval: tuple[float, float], tol: float | None = None
) -> float:
    """
    Integrate g(s) log|s - s0| over the interval.

    The interval is split at s0 and each side uses QUADPACK's algebraic-logarithmic
    weights, which are exact for the log factor.

    Args:
        g: Regular factor, bounded on the interval
        s0: Singularity location
        interval: (a, b), b may be np.inf
        tol: Absolute tolerance

    Returns:
        The integral.
    """
    tol = default_tolerance() if tol is None else tol
    a, b = interval
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if s0 < a or s0 > b:
        return integrate_radial(lambda s: g(s) * math.log(abs(s - s0)), 1, a, b, tol)

    total = 0.0
    finite_b = b
    if math.isinf(b):
        finite_b = s0 + max(1.0, abs(s0))
        total += integrate_radial(lambda s: g(s) * math.log(s - s0), 1, finite_b, b, tol / 3)
    if s0 > a:
        total += quad(g, a, s0, tol / 3, weight="alg-logb", wvar=(0.0, 0.0), label="log_singular_left")[0]
    if s0 < finite_b:
        total += quad(g, s0, finite_b, tol / 3, weight="alg-loga", wvar=(0.0, 0.0), label="log_singular_right")[0]
    return total


def _pv_numerator(phi: ScalarFunction, s0: float, s: float) -> float:
    return phi(s) * (s - s0)


def _check_pv_order(phi: ScalarFunction, s0: float, width: float) -> None:
    """Raise PVDivergent when phi (s - s0) is unbounded near s0."""
    coarse = max(
        abs(_pv_numerator(phi, s0, s0 + sign * width * scale)) for sign in (-1.0, 1.0) for scale in (1e-2, 1e-3)
    )
    fine = max(abs(_pv_numerator(phi, s0, s0 + sign * width * 1e-6)) for sign in (-1.0, 1.0))
    if not math.isfinite(fine) or (fine > 100.0 * coarse and fine > 1e-12):
        raise PVDivergent(f"singularity at s0={s0} is stronger than first order")


def estimate_residue(phi: ScalarFunction, s0: float, width: float) -> float:
    """First-order Laurent coefficient of phi at s0 by symmetric sampling."""
    eps = width * 1e-5
    return 0.5 * (_pv_numerator(phi, s0, s0 + eps) + _pv_numerator(phi, s0, s0 - eps))


def pv_integrate(
    phi: ScalarFunction,
    s0: float,
    interval: tuple[float, float],
    tol: float | None = None,
    residue: float | None = None,
) -> float:
    """
    Principal value of the integral of phi over the interval.

    phi must behave like c/(s - s0) + bounded near s0. The first-order Laurent term is
    removed analytically: QUADPACK's Cauchy weight integrates phi (s - s0) / (s - s0),
    so no large cancelling values are ever summed.

    Args:
        phi: Integrand with a simple pole at s0
        s0: Pole location
        interval: (a, b), b may be np.inf
        tol: Absolute tolerance
        residue: Laurent coefficient c; estimated by symmetric sampling when omitted

    Returns:
        The principal value.

    Raises:
        PVDivergent: The singularity does not cancel
    """
    tol = default_tolerance() if tol is None else tol
    a, b = interval
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if not a < s0 < b:
        return integrate_radial(phi, 1, a, b, tol)

    width = min(s0 - a, b - s0) if math.isfinite(b) else min(s0 - a, max(1.0, abs(s0)))
    _check_pv_order(phi, s0, width)
    if residue is None:
        residue = estimate_residue(phi, s0, width)

    def numerator(s: float) -> float:
        if s == s0:
            return residue
        return _pv_numerator(phi, s0, s)

    total = 0.0
    upper = b
    if math.isinf(b):
        upper = s0 + width
        total += integrate_radial(phi, 1, upper, b, tol / 2)
    total += quad(numerator, a, upper, tol / 2, weight="cauchy", wvar=s0, label="pv_integrate")[0]
    return total


def log_integral_exp(
    g: Callable[[np.ndarray], np.ndarray], a: float, b: float, tol: float | None = None, cutoff: float = 60.0
) -> float:
    """
    log of the integral of exp(g(r)) over [a, b] without overflow.

    The range is narrowed by repeated sampling to the span where g is within
    cutoff of its maximum, so sharp boundary layers of rapidly growing g are resolved.

    Args:
        g: Vectorized exponent
        a, b: Finite limits
        tol: Relative tolerance for the scaled integral
        cutoff: Contributions below exp(-cutoff) of the peak are dropped

    Returns:
        log of the integral (-inf if the integrand vanishes).
    """
    tol = default_tolerance() if tol is None else tol
    lo, hi = a, b
    peak = -np.inf
    for _ in range(60):
        samples = np.linspace(lo, hi, 129)
        with np.errstate(divide="ignore"):
            values = np.asarray(g(samples), dtype=np.float64)
        peak = float(np.max(values))
        if not math.isfinite(peak):
            if peak == -np.inf:
                return -np.inf
            raise DomainError("exponent is not finite on the integration range")
        keep = np.nonzero(values >= peak - cutoff)[0]
        new_lo = samples[max(keep[0] - 1, 0)]
        new_hi = samples[min(keep[-1] + 1, len(samples) - 1)]
        lo, hi = float(new_lo), float(new_hi)
        if len(keep) >= 8:
            break

    def scaled(r: float) -> float:
        with np.errstate(divide="ignore"):
            return math.exp(float(g(np.array([r]))[0]) - peak)

    value, _ = quad(scaled, lo, hi, tol * (hi - lo), label="log_integral_exp")
    if value <= 0.0:
        return -np.inf
    return peak + math.log(value)


# =============================================================================
# Fits
# =============================================================================


@dataclass(frozen=True)
class FitResult:
    """Least-squares line through (log x, y or log y) on a trailing window."""

    slope: float
    intercept: float
    window: tuple[int, int]  # [start, stop) indices into the input
    residual_rms: float
    stability: float  # max |sub-window slope - slope|
    sub_slopes: tuple[float, ...] = ()

    @property
    def band(self) -> tuple[float, float]:
        """Slope stability band."""
        return (self.slope - self.stability, self.slope + self.stability)


def _validate_points(x: np.ndarray, y: np.ndarray, min_points: int) -> None:
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-D arrays of equal length")
    if len(x) < min_points:
        raise DomainError(f"need at least {min_points} points, got {len(x)}")
    if np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise DomainError("x must be positive and strictly increasing")
    if not np.all(np.isfinite(y)):
        raise DomainError("y must be finite")


def _windowed_fit(lx: np.ndarray, ly: np.ndarray, fraction: float, min_points: int) -> FitResult:
    count = len(lx)
    size = min(count, max(min_points, math.ceil(fraction * count)))
    start = count - size
    xs, ys = lx[start:], ly[start:]
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = ys - (slope * xs + intercept)
    rms = float(np.sqrt(np.mean(residual**2)))

    sub = max(_fit_cfg.min_window, size // 2)
    sub_slopes = tuple(float(np.polyfit(lx[i : i + sub], ly[i : i + sub], 1)[0]) for i in range(start, count - sub + 1))
    stability = max((abs(s - slope) for s in sub_slopes), default=0.0)
    return FitResult(float(slope), float(intercept), (start, count), rms, float(stability), sub_slopes)


def fit_loglog_slope(
    x: Sequence[float], y: Sequence[float], *, fraction: float | None = None, min_points: int | None = None
) -> FitResult:
    """
    Slope of log y against log x over the trailing window.

    Args:
        x: Strictly increasing positive abscissae
        y: Positive ordinates
        fraction: Trailing share of points in the window (default 0.4)
        min_points: Minimum number of points, also the minimum window (default 8)

    Returns:
        FitResult with slope, intercept, window, residual and stability band.

    Raises:
        DomainError: Any y <= 0 or too few points
    """
    fraction = _fit_cfg.window_fraction if fraction is None else fraction
    min_points = _fit_cfg.min_points if min_points is None else min_points
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _validate_points(x, y, min_points)
    if np.any(y <= 0):
        raise DomainError("log-log fit needs strictly positive y")
    return _windowed_fit(np.log(x), np.log(y), fraction, min_points)


def fit_semilog_slope(
    x: Sequence[float], y: Sequence[float], *, fraction: float | None = None, min_points: int | None = None
) -> FitResult:
    """Slope of y against log x over the trailing window (same policy as fit_loglog_slope)."""
    fraction = _fit_cfg.window_fraction if fraction is None else fraction
    min_points = _fit_cfg.min_points if min_points is None else min_points
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _validate_points(x, y, min_points)
    return _windowed_fit(np.log(x), y, fraction, min_points)


@dataclass(frozen=True)
class EvenPolynomialFit:
    """Least-squares fit on the basis 1, r^2, ..., r^max_degree."""

    coefficients: tuple[float, ...]  # c_0, c_2, c_4, ...
    residual_rms: float
    max_degree: int

    def __call__(self, r) -> np.ndarray:
        r2 = np.asarray(r, dtype=np.float64) ** 2
        return np.polynomial.polynomial.polyval(r2, self.coefficients)


def fit_even_polynomial(r: Sequence[float], v: Sequence[float], max_degree: int) -> EvenPolynomialFit:
    """
    Fit v(r) by an even polynomial of degree at most max_degree.

    Radii are rescaled by max|r| before solving, which keeps the basis well conditioned
    on grids spanning several decades.

    Raises:
        DomainError: max_degree negative or odd
        IllPosedFit: Too few points or too few distinct radii
    """
    if max_degree < 0 or max_degree % 2:
        raise DomainError(f"max_degree must be a non-negative even integer, got {max_degree}")
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    size = max_degree // 2 + 1
    if len(r) < size + 1 or len(r) != len(v):
        raise IllPosedFit(f"need at least {size + 1} points for degree {max_degree}")
    if len(np.unique(r**2)) < size + 1:
        raise IllPosedFit("duplicate radii leave the fit rank deficient")

    scale = float(np.max(np.abs(r))) or 1.0
    powers = 2 * np.arange(size)
    basis = (r / scale)[:, np.newaxis] ** powers
    solution, _, rank, _ = np.linalg.lstsq(basis, v, rcond=None)
    if rank < size:
        raise IllPosedFit(f"rank {rank} < {size}")
    residual = basis @ solution - v
    coefficients = tuple(float(c) for c in solution / scale**powers)
    return EvenPolynomialFit(coefficients, float(np.sqrt(np.mean(residual**2))), max_degree)
