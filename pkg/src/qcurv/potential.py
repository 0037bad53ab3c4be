"""Logarithmic potential L(f), its total mass alpha, and ball averages.

L(f)(x) = N * int log(|y| / |x - y|) f(y) dy with N = 2 / ((n-1)! |S^n|). For radial f
the angular integral collapses to the spherical mean A(r, s) of log|x - y| over |y| = s,
which is log max(r, s) + G((min/max)^2) with G a power series in closed form for n <= 4.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import make_interp_spline
from scipy.special import betainc, hyp2f1, xlogy

from src.common.config import GRID_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import DomainError, OperandNotInDomain, UnsupportedCheck
from src.qcurv.numerics import (
    RadialGrid,
    dimension_constants,
    geometric_breakpoints,
    integrate_log_singular,
    integrate_segments,
    quad,
    sphere_area,
    validate_dimension,
)
from src.qcurv.operators import iterate_laplacian, laplacian_profile, laplacian_tail
from src.qcurv.profiles import (
    RadialProfile,
    Smoothness,
    TailKind,
    TailModel,
    builtin_profile,
    composite_profile,
    decay_check,
    sampled_profile,
    table_nodes,
)

_logger = get_logger(__name__)

_SERIES_TERMS = 4000
_SMALL_Z = 1e-2


# =============================================================================
# Kernel
# =============================================================================


def _series_coefficients(n: int) -> np.ndarray:
    """d_k with 1 - (1 - z) F(z) = sum d_k z^k, F = 2F1(1, 2 - n/2; n/2; z)."""
    b, c = 2.0 - n / 2.0, n / 2.0
    ratios = np.empty(_SERIES_TERMS + 1)
    ratios[0] = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        ratios[k] = ratios[k - 1] * (b + k - 1) / (c + k - 1)
    d = np.zeros(_SERIES_TERMS + 1)
    d[1:] = ratios[:-1] - ratios[1:]
    nonzero = np.nonzero(d)[0]
    return d[: nonzero[-1] + 1] if len(nonzero) else d[:1]


@dataclass(frozen=True, eq=False)
class LogKernelTable:
    """
    Spherical means over |y| = s at |x| = r in dimension n.

    value: A(r, s), mean of log|x - y|
    inverse_square_mean: M_n(r, s), mean of |x - y|^{-2}
    radial_derivative: d A / d r
    """

    n: int
    derivative_series: np.ndarray  # d_k
    correction_series: np.ndarray = field(init=False)  # coefficients of G(z) = sum d_k z^k / (4k)

    def __post_init__(self):
        d = self.derivative_series
        g = np.zeros_like(d)
        g[1:] = d[1:] / (4.0 * np.arange(1, len(d)))
        object.__setattr__(self, "correction_series", g)

    def correction(self, z):
        """G(z) = A(r, s) - log max(r, s), z = (min/max)^2."""
        z = np.asarray(z, dtype=np.float64)
        if self.n == 2:
            return np.zeros_like(z)
        if self.n == 3:
            rho = np.sqrt(z)
            small = rho < 1e-3
            safe = np.where(small, 0.5, rho)
            closed = ((1.0 + safe) ** 2 * np.log1p(safe) - xlogy((1.0 - safe) ** 2, 1.0 - safe)) / (4.0 * safe) - 0.5
            return np.where(small, z / 6.0 + z * z / 60.0, closed)
        return npoly.polyval(z, self.correction_series)

    def _hypergeometric(self, z):
        """F(z) = max^2 * M_n."""
        z = np.asarray(z, dtype=np.float64)
        if self.n == 2:
            with np.errstate(divide="ignore"):
                return 1.0 / (1.0 - z)
        if self.n == 3:
            rho = np.sqrt(z)
            safe = np.where(rho < 1e-8, 0.5, rho)
            with np.errstate(divide="ignore"):
                return np.where(rho < 1e-8, 1.0, np.arctanh(safe) / safe)
        return hyp2f1(1.0, 2.0 - self.n / 2.0, self.n / 2.0, z)

    def _one_minus_reduced(self, z):
        """1 - (1 - z) F(z), stable for small z."""
        z = np.asarray(z, dtype=np.float64)
        if self.n == 2:
            return np.zeros_like(z)
        series = npoly.polyval(z, self.derivative_series[:12])
        with np.errstate(divide="ignore", invalid="ignore"):
            reduced = (1.0 - z) * self._hypergeometric(z)
        # (1 - z) F(z) -> 0 on the diagonal for n >= 3
        direct = np.where(z >= 1.0, 1.0, 1.0 - reduced)
        return np.where(z < _SMALL_Z, series, direct)

    def value(self, r, s):
        r, s = np.broadcast_arrays(np.asarray(r, dtype=np.float64), np.asarray(s, dtype=np.float64))
        hi = np.maximum(r, s)
        if np.any(hi == 0.0):
            raise DomainError("log kernel is undefined at r = s = 0")
        z = (np.minimum(r, s) / hi) ** 2
        return np.log(hi) + self.correction(z)

    def potential_weight(self, r: float, s: float) -> float:
        """log s - A(r, s), without cancellation for s >> r."""
        if s == 0.0:
            return -math.inf
        if r == 0.0:
            return 0.0
        hi, lo = (r, s) if r >= s else (s, r)
        z = (lo / hi) ** 2
        head = math.log(s / r) if s < r else 0.0
        return head - float(self.correction(z))

    def inverse_square_mean(self, r, s):
        r, s = np.broadcast_arrays(np.asarray(r, dtype=np.float64), np.asarray(s, dtype=np.float64))
        hi = np.maximum(r, s)
        z = (np.minimum(r, s) / hi) ** 2
        return self._hypergeometric(z) / hi**2

    def radial_derivative(self, r: float, s: float) -> float:
        """[1 + (r^2 - s^2) M_n] / (2r); zero at r = 0."""
        if r == 0.0:
            return 0.0
        if s == 0.0:
            return 1.0 / r
        if r < s:
            return float(self._one_minus_reduced((r / s) ** 2)) / (2.0 * r)
        z = (s / r) ** 2
        if self.n == 2:
            return 1.0 / r
        return (2.0 - float(self._one_minus_reduced(z))) / (2.0 * r)


@lru_cache(maxsize=16)
def get_kernel_table(n: int) -> LogKernelTable:
    n = validate_dimension(n)
    return LogKernelTable(n=n, derivative_series=_series_coefficients(n))


def log_kernel(r: float, s: float, n: int) -> float:
    """
    Mean of log|x - y| over |y| = s at |x| = r.

    Raises:
        DomainError: r = s = 0 or negative radii
    """
    if r < 0 or s < 0:
        raise DomainError(f"radii must be nonnegative, got ({r}, {s})")
    return float(get_kernel_table(n).value(r, s))


def log_kernel_quadrature(r: float, s: float, n: int) -> float:
    """Same spherical mean by polar-angle quadrature; independent of the series and closed forms."""
    n = validate_dimension(n)
    if r == 0.0 and s == 0.0:
        raise DomainError("log kernel is undefined at r = s = 0")
    if r == 0.0 or s == 0.0:
        return math.log(max(r, s))
    a = (n - 3) / 2.0
    weight = sphere_area(n - 2) / sphere_area(n - 1)
    if r == s:
        # log(2 r^2 (1 - t)) = log(2 r^2) + log(1 - t)
        value, _ = quad(lambda t: 0.5, -1.0, 1.0, 1e-14, weight="alg-logb", wvar=(a, a), label="log_kernel_diag")
        return 0.5 * math.log(2.0 * r * r) + weight * value
    value, _ = quad(
        lambda t: 0.5 * math.log(r * r + s * s - 2.0 * r * s * t),
        -1.0,
        1.0,
        1e-14,
        weight="alg",
        wvar=(a, a),
        label="log_kernel",
    )
    return weight * value


# =============================================================================
# Total mass
# =============================================================================


@dataclass(frozen=True)
class TotalMass:
    """int f dx and its normalized value alpha."""

    integral: float
    alpha: float
    n: int


def _breakpoints(f: RadialProfile, *extra: float) -> list[float]:
    if f.support is not None:
        lo, hi = f.support
        points = [lo, hi]
    else:
        far = max([GRID_CONFIG.table_r_max, *(100.0 * x for x in extra)])
        points = [0.0, *geometric_breakpoints(1e-3, far), np.inf]
    inner = [x for x in extra if points[0] < x < points[-1]]
    return sorted(set(points) | set(inner))


def _radial_moment(f: RadialProfile, n: int, weight=None, label: str = "moment") -> float:
    """int f(s) weight(s) s^{n-1} ds over the support of f."""
    power = n - 1

    def integrand(s: float) -> float:
        base = f(s) * s**power
        return base if weight is None else base * weight(s)

    return integrate_segments(integrand, _breakpoints(f), label=label)[0]


def _require_integrable(f: RadialProfile, n: int, operation: str) -> None:
    if f.support is not None:
        return
    if not decay_check(f, n).integrable:
        raise OperandNotInDomain(f"{operation}: {f.name} is not integrable on R^{n}", f.name)


def alpha_of(f: RadialProfile, n: int) -> TotalMass:
    """
    Total mass int f dx and alpha = N int f dx.

    Raises:
        OperandNotInDomain: f not integrable
    """
    dims = dimension_constants(n)
    _require_integrable(f, n, "alpha_of")
    integral = dims.sphere_volume_n_minus_1 * _radial_moment(f, n, label="alpha_of")
    return TotalMass(integral=integral, alpha=dims.normalization * integral, n=n)


# =============================================================================
# Potential
# =============================================================================


def _potential_at(f: RadialProfile, r: float, n: int, kernel: LogKernelTable) -> float:
    if r == 0.0:
        return 0.0
    power = n - 1
    value, _ = integrate_segments(
        lambda s: kernel.potential_weight(r, s) * f(s) * s**power if s > 0.0 else 0.0,
        _breakpoints(f, r),
        label="log_potential",
    )
    return dimension_constants(n).potential_factor * value


def _potential_derivative_at(f: RadialProfile, r: float, n: int, kernel: LogKernelTable) -> float:
    if r == 0.0:
        return 0.0
    power = n - 1
    value, _ = integrate_segments(
        lambda s: kernel.radial_derivative(r, s) * f(s) * s**power,
        _breakpoints(f, r),
        label="log_potential_derivative",
    )
    return -dimension_constants(n).potential_factor * value


def _potential_laplacian_at(f: RadialProfile, r: float, n: int, kernel: LogKernelTable) -> float:
    if n == 2:
        return -f(r)
    factor = (n - 2) * dimension_constants(n).potential_factor
    points = _breakpoints(f, r)
    if r == 0.0:
        power = n - 3
        value, _ = integrate_segments(lambda s: f(s) * s**power, points, label="log_potential_laplacian")
        return -factor * value
    if n == 3:
        # M_3 = [log(r + s) - log|r - s|] / (2 r s)
        regular, _ = integrate_segments(lambda s: math.log(r + s) * f(s) * s, points, label="log_potential_laplacian")
        singular = integrate_log_singular(lambda s: f(s) * s, r, (points[0], points[-1]))
        return -factor * (regular - singular) / (2.0 * r)
    power = n - 1
    value, _ = integrate_segments(
        lambda s: float(kernel.inverse_square_mean(r, s)) * f(s) * s**power, points, label="log_potential_laplacian"
    )
    return -factor * value


def log_potential(f: RadialProfile, r_points, n: int) -> np.ndarray:
    """
    L(f) at the requested radii.

    Raises:
        OperandNotInDomain: f not integrable
    """
    n = validate_dimension(n)
    _require_integrable(f, n, "log_potential")
    kernel = get_kernel_table(n)
    points = np.atleast_1d(np.asarray(r_points, dtype=np.float64))
    return np.array([_potential_at(f, float(r), n, kernel) for r in points])


def log_potential_derivative(f: RadialProfile, r_points, n: int) -> np.ndarray:
    """d/dr L(f) at the requested radii, from the exact kernel derivative."""
    n = validate_dimension(n)
    _require_integrable(f, n, "log_potential_derivative")
    kernel = get_kernel_table(n)
    return np.array([_potential_derivative_at(f, float(r), n, kernel) for r in np.atleast_1d(r_points)])


def log_potential_laplacian(f: RadialProfile, r_points, n: int) -> np.ndarray:
    """Delta L(f) at the requested radii, from the kernel M_n (or -f for n = 2)."""
    n = validate_dimension(n)
    kernel = get_kernel_table(n)
    return np.array([_potential_laplacian_at(f, float(r), n, kernel) for r in np.atleast_1d(r_points)])


def _even_spline(r: np.ndarray, v: np.ndarray, odd: bool = False):
    x = np.concatenate([-r[::-1], r])
    y = np.concatenate([(-v if odd else v)[::-1], v])
    return make_interp_spline(x, y, k=3)


def potential_profile(f: RadialProfile, n: int, *, name: str | None = None) -> RadialProfile:
    """
    L(f) as a conformal-factor profile.

    Value, exact radial derivative and exact Laplacian are tabulated on the potential
    table and interpolated; beyond the table the log tail -alpha log r + offset is used.

    Raises:
        OperandNotInDomain: f not integrable
    """
    n = validate_dimension(n)
    _require_integrable(f, n, "potential_profile")
    dims = dimension_constants(n)
    kernel = get_kernel_table(n)
    nodes = table_nodes(f.support)
    _logger.info("Tabulating L(%s) in n=%d on %d nodes", f.name, n, len(nodes))

    values = np.array([_potential_at(f, float(r), n, kernel) for r in nodes])
    slopes = np.array([_potential_derivative_at(f, float(r), n, kernel) for r in nodes])
    laplacians = np.array([_potential_laplacian_at(f, float(r), n, kernel) for r in nodes])

    alpha = dims.potential_factor * _radial_moment(f, n, label="potential_alpha")
    offset = dims.potential_factor * _radial_moment(f, n, lambda s: math.log(s) if s > 0 else 0.0, "potential_offset")
    tail = TailModel(TailKind.LOG, 0.0, -alpha, offset=offset)

    value_spline = _even_spline(nodes, values)
    slope_spline = _even_spline(nodes, slopes, odd=True)
    laplacian_spline = _even_spline(nodes, laplacians)
    r_last = nodes[-1]

    def evaluator(r: np.ndarray, order: int) -> np.ndarray:
        out = np.empty_like(r)
        inside = r <= r_last
        ri = r[inside]
        if order == 0:
            out[inside] = value_spline(ri)
        elif order == 1:
            out[inside] = slope_spline(ri)
        else:
            lap = laplacian_spline(ri)
            d1 = slope_spline(ri)
            positive = ri > 0
            second = lap / n
            second[positive] = lap[positive] - (n - 1) * d1[positive] / ri[positive]
            out[inside] = second
        if not np.all(inside):
            out[~inside] = tail.predict(r[~inside], order)
        return out

    label = name or f"L[{f.name}]"
    laplacian_table = np.column_stack([nodes, -laplacians])

    def laplacian_power(m: int, n_: int) -> RadialProfile:
        if n_ != n:
            raise DomainError(f"{label} was tabulated for n={n}, not n={n_}")
        first = sampled_profile(laplacian_table, tail=laplacian_tail(tail, n), name=f"(-Δ)[{label}]")
        return first if m == 1 else laplacian_profile(first, m - 1, n)

    readonly = nodes.copy()
    readonly.flags.writeable = False
    return RadialProfile(
        name=label,
        evaluator=evaluator,
        tail=tail,
        smoothness=Smoothness.SAMPLED,
        laplacian_power=laplacian_power,
        is_constant=bool(np.all(values == 0.0)),
        nodes=readonly,
    )


def potential_metric_profile(density: RadialProfile, n: int, quadratic: float = 0.0) -> RadialProfile:
    """u = quadratic * r^2 + L(density)."""
    potential = potential_profile(density, n)
    if quadratic == 0.0:
        return potential
    return composite_profile([(potential, 1.0), (builtin_profile("monomial", {"k": 1}), quadratic)])


def scaled_density(family: str, alpha: float, n: int) -> RadialProfile:
    """Density of the given family ("bump" or "sphere") with total mass alpha."""
    if family == "bump":
        return builtin_profile("bump", {"alpha": alpha, "n": n})
    if family == "sphere":
        shape = builtin_profile("rational", {"amplitude": 1.0, "power": float(n)})
        unit = alpha_of(shape, n).alpha
        return builtin_profile("rational", {"amplitude": alpha / unit, "power": float(n)})
    raise DomainError(f"unknown density family '{family}'")


# =============================================================================
# Green's property
# =============================================================================


@dataclass(frozen=True)
class GreensResidual:
    """Max relative residual of (-Delta)^{n/2} L(f) against f."""

    n: int
    max_relative_residual: float
    radii: np.ndarray
    residuals: np.ndarray


def greens_property_check(f: RadialProfile, grid: RadialGrid, n: int) -> GreensResidual:
    """
    Differentiate the tabulated L(f) values (quintic spline) and compare with f.

    Raises:
        UnsupportedCheck: n odd, or n/2 > 2
    """
    n = validate_dimension(n)
    if n % 2 == 1 or n // 2 > 2:
        raise UnsupportedCheck(f"Green's property check needs n in {{2, 4}}, got n={n}")
    potential = potential_profile(f, n)
    nodes = potential.nodes
    table = np.column_stack([nodes, potential(nodes)])
    sampled = sampled_profile(table, interpolation_order=5, tail=potential.tail, name=f"sampled {potential.name}")
    recovered = iterate_laplacian(sampled, n // 2, grid, n).values
    target = f(grid.nodes)
    scale = float(np.max(np.abs(target)))
    mask = np.abs(target) >= 1e-3 * scale
    residuals = np.abs(recovered - target)
    worst = float(np.max(residuals[mask]) / scale) if scale > 0 else float(np.max(residuals))
    _logger.info("Green's property n=%d for %s: max relative residual %.3g", n, f.name, worst)
    return GreensResidual(n=n, max_relative_residual=worst, radii=grid.nodes[mask], residuals=residuals[mask])


# =============================================================================
# Ball averages
# =============================================================================


def _cap_fraction(center: float, radius: float, s: float, n: int) -> float:
    """Fraction of the sphere |y| = s inside B_radius(x), |x| = center."""
    if s <= radius - center:
        return 1.0
    if s >= center + radius or s <= center - radius:
        return 0.0
    cos_theta = (center * center + s * s - radius * radius) / (2.0 * center * s)
    cos_theta = min(1.0, max(-1.0, cos_theta))
    half_cap = 0.5 * betainc((n - 1) / 2.0, 0.5, 1.0 - cos_theta * cos_theta)
    return half_cap if cos_theta >= 0.0 else 1.0 - half_cap


def ball_average(u: RadialProfile, center: float, radius: float, n: int) -> float:
    """
    Average of a radial function over B_radius(x) with |x| = center.

    Each sphere |y| = s is weighted by the fraction of it inside the ball.
    """
    n = validate_dimension(n)
    if radius <= 0 or center < 0:
        raise DomainError(f"need radius > 0 and center >= 0, got radius={radius}, center={center}")
    power = n - 1
    lo = abs(center - radius)
    hi = center + radius
    points = [0.0, lo, hi] if radius > center else [lo, hi]
    if lo < center < hi:
        points = sorted([*points, center])
    value, _ = integrate_segments(
        lambda s: u(s) * _cap_fraction(center, radius, s, n) * s**power if s > 0 else 0.0,
        points,
        label="ball_average",
    )
    return n * value / radius**n
