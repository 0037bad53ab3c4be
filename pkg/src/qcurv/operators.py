"""Radial Laplacian, iterated Laplacians, the principal-value half-Laplacian and (-Delta)^{n/2}."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma, hyp2f1, spherical_jn

from src.common.config import HALF_LAPLACIAN_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import (
    DomainError,
    InsufficientSmoothness,
    OperandNotInDomain,
    OracleInapplicable,
)
from src.qcurv.numerics import (
    RadialGrid,
    dimension_constants,
    geometric_breakpoints,
    integrate_segments,
    pv_integrate,
    quad,
    sphere_area,
    validate_dimension,
)
from src.qcurv.profiles import (
    ConformalMetric,
    RadialProfile,
    Smoothness,
    TailKind,
    TailModel,
    composite_profile,
    decay_check,
    sampled_profile,
)

_logger = get_logger(__name__)

_cfg = HALF_LAPLACIAN_CONFIG


@dataclass(frozen=True)
class HalfLapConfig:
    """Parameters of the principal-value half-Laplacian in dimension n."""

    n: int
    normalization_constant: float  # Gamma((n+1)/2) / pi^{(n+1)/2}, Fourier symbol |xi|
    excision_fraction: float = _cfg.excision_fraction
    truncation_radius: float = _cfg.truncation_radius
    truncation_factor: float = _cfg.truncation_factor
    tolerance: float = _cfg.tolerance
    diagonal_offset: float = _cfg.diagonal_offset

    @classmethod
    def for_dimension(cls, n: int, **overrides) -> "HalfLapConfig":
        n = validate_dimension(n)
        constant = gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0)
        return cls(n=n, normalization_constant=float(constant), **overrides)

    def truncation(self, r: float) -> float:
        return max(self.truncation_radius, self.truncation_factor * r)


@dataclass(frozen=True, eq=False)
class OperatorResult:
    """Operator samples on a grid."""

    grid: RadialGrid
    values: np.ndarray
    error_estimates: np.ndarray
    operand_decay_verified: bool = False
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.grid) or len(self.error_estimates) != len(self.grid):
            raise DomainError("operator result length does not match its grid")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("operator produced non-finite values")


# =============================================================================
# Local operators
# =============================================================================


def radial_laplacian(p: RadialProfile, r, n: int):
    """u'' + (n-1)/r u', with the even-extension limit n u''(0) at r = 0."""
    n = validate_dimension(n)
    scalar = np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    d1 = p(rr, 1)
    d2 = p(rr, 2)
    positive = rr > 0
    out = n * d2
    out[positive] = d2[positive] + (n - 1) * d1[positive] / rr[positive]
    return float(out[0]) if scalar else out


def laplacian_tail(tail: TailModel, n: int) -> TailModel:
    """Leading tail of -Delta applied to a function with the given tail."""
    if tail.vanishes:
        return TailModel(TailKind.COMPACT)
    c, e = tail.leading_coefficient, tail.leading_exponent
    if tail.kind == TailKind.LOG:
        coefficient = -c * (n - 2)
        if coefficient == 0.0:
            return TailModel(TailKind.COMPACT)
        return TailModel(TailKind.POWER, -2.0, coefficient, trusted=tail.trusted, stability=tail.stability)
    if tail.kind == TailKind.GAUSSIAN:
        rate = tail.offset
        return TailModel(TailKind.GAUSSIAN, e, -c * (rate * e) ** 2, offset=rate, trusted=tail.trusted)
    coefficient = -c * e * (e + n - 2)
    if coefficient == 0.0:
        return TailModel(TailKind.COMPACT)
    kind = TailKind.POLYNOMIAL if e - 2.0 > 1e-6 else TailKind.POWER
    return TailModel(kind, e - 2.0, coefficient, trusted=tail.trusted, stability=tail.stability)


def _sampled_laplacian(p: RadialProfile, n: int) -> RadialProfile:
    nodes = p.nodes
    values = -radial_laplacian(p, nodes, n)
    return sampled_profile(
        np.column_stack([nodes, values]),
        tail=laplacian_tail(p.tail, n),
        name=f"(-Δ)[{p.name}]",
    )


def laplacian_profile(p: RadialProfile, m: int, n: int) -> RadialProfile:
    """
    Profile of (-Delta)^m p.

    Analytic profiles differentiate exactly; sampled ones re-spline the table after each step.

    Raises:
        InsufficientSmoothness: m > 2 on a sampled profile, or no derivative route exists
    """
    n = validate_dimension(n)
    if m < 0:
        raise DomainError(f"Laplacian power must be >= 0, got {m}")
    if m == 0:
        return p
    if p.laplacian_power is not None:
        return p.laplacian_power(m, n)
    if p.parts:
        return composite_profile([(laplacian_profile(part, m, n), w) for part, w in p.parts])
    if p.smoothness == Smoothness.SAMPLED and p.nodes is not None:
        if m > 2:
            raise InsufficientSmoothness(f"{p.name}: sampled profiles support (-Δ)^m only for m <= 2, got m={m}")
        result = p
        for _ in range(m):
            result = _sampled_laplacian(result, n)
        return result
    raise InsufficientSmoothness(f"{p.name}: no derivative route for (-Δ)^{m}")


def iterate_laplacian(p: RadialProfile, m: int, grid: RadialGrid, n: int) -> OperatorResult:
    """(-Delta)^m p = (-1)^m Delta^m p sampled on the grid."""
    if m < 1:
        raise DomainError(f"iterate_laplacian needs m >= 1, got {m}")
    target = laplacian_profile(p, m, n)
    values = target(grid.nodes)
    return OperatorResult(grid, np.asarray(values, dtype=np.float64), np.zeros(len(grid)), operand_decay_verified=True)


# =============================================================================
# Half-Laplacian (principal value)
# =============================================================================


def _kernel_polynomial(n: int, z):
    """2F1(-1/2, (n-3)/2; n/2; z), the regular factor of the angular kernel."""
    return hyp2f1(-0.5, (n - 3) / 2.0, n / 2.0, z)


def kernel_diagonal_product(r: float, s: float, n: int) -> float:
    """
    K_n(r, s) (s - r)^2, smooth across the diagonal.

    K_n is the mean of |x - y|^{-(n+1)} over |y| = s with |x| = r.
    """
    hi, lo = (r, s) if r >= s else (s, r)
    rho = lo / hi
    return hi ** (3 - n) * _kernel_polynomial(n, rho * rho) / (r + s) ** 2


def angular_kernel(r: float, s: float, n: int) -> float:
    """Mean of |x - y|^{-(n+1)} over |y| = s, |x| = r; elementary for n = 3."""
    if n == 3:
        return 1.0 / (r * r - s * s) ** 2
    return kernel_diagonal_product(r, s, n) / (s - r) ** 2


def angular_kernel_quadrature(r: float, s: float, n: int) -> float:
    """Polar-angle quadrature of the same spherical mean; independent of the closed form."""
    a = (n - 3) / 2.0
    weight = sphere_area(n - 2) / sphere_area(n - 1)
    value, _ = quad(
        lambda t: (r * r + s * s - 2.0 * r * s * t) ** (-(n + 1) / 2.0),
        -1.0,
        1.0,
        1e-14,
        weight="alg",
        wvar=(a, a),
        label="angular_kernel",
    )
    return weight * value


def _tail_integral(tail: TailModel, start: float) -> float:
    """Integral of tail(s) s^{-2} over [start, inf)."""
    if tail.vanishes or tail.kind == TailKind.GAUSSIAN:
        return 0.0
    c, e = tail.leading_coefficient, tail.leading_exponent
    if tail.kind == TailKind.LOG:
        return c * (math.log(start) + 1.0) / start + tail.offset / start
    return c * start ** (e - 1.0) / (1.0 - e)


def _half_laplacian_at(p: RadialProfile, r: float, n: int, cfg: HalfLapConfig) -> tuple[float, float]:
    """Half-Laplacian at one radius: (value, error estimate)."""
    dims = dimension_constants(n)
    prefactor = cfg.normalization_constant * dims.sphere_volume_n_minus_1
    phi_r = p(r)
    truncation = cfg.truncation(r)
    tail_correction = phi_r / truncation - _tail_integral(p.tail, truncation)
    tol = cfg.tolerance

    if r == 0.0:
        def origin_integrand(s: float) -> float:
            if s == 0.0:
                return 0.0
            return (phi_r - p(s)) / (s * s)

        pieces = [0.0, *geometric_breakpoints(1e-3, truncation)]
        value, err = integrate_segments(origin_integrand, pieces, tol, label="half_laplacian_origin")
        total = value + tail_correction
        return prefactor * total, prefactor * (err + abs(tail_correction) * 1e-6)

    delta = cfg.excision_fraction * r
    dphi = p(r, 1)
    ddphi = p(r, 2)
    near = cfg.diagonal_offset * r
    power = n - 1

    def difference_quotient(s: float) -> float:
        h = s - r
        if abs(h) < near:
            return dphi + 0.5 * ddphi * h
        return (p(s) - phi_r) / h

    def regular(s: float) -> float:
        return -difference_quotient(s) * kernel_diagonal_product(r, s, n) / (s - r) * s**power

    def numerator(s: float) -> float:
        return -difference_quotient(s) * kernel_diagonal_product(r, s, n) * s**power

    residue = -dphi * kernel_diagonal_product(r, r, n) * r**power

    if r - delta > 1e-3:
        inner = [0.0, *geometric_breakpoints(1e-3, r - delta)]
    else:
        inner = [0.0, r - delta]
    left, left_err = integrate_segments(regular, inner, tol, label="half_laplacian_inner")

    middle = pv_integrate(
        lambda s: numerator(s) / (s - r),
        r,
        (r - delta, r + delta),
        tol,
        residue=residue,
    )

    outer = geometric_breakpoints(r + delta, truncation) if truncation > r + delta else [r + delta]
    right, right_err = integrate_segments(regular, outer, tol, label="half_laplacian_outer")

    total = left + middle + right + tail_correction
    error = left_err + right_err + tol + abs(tail_correction) * (r / truncation) ** 2
    return prefactor * total, prefactor * error


def half_laplacian(
    p: RadialProfile, grid: RadialGrid, n: int, cfg: HalfLapConfig | None = None, *, factor: str = ""
) -> OperatorResult:
    """
    (-Delta)^{1/2} p in odd dimension n, as a principal-value integral.

    The operand must decay in the L_{1/2} sense. Constants are annihilated exactly.

    Raises:
        DomainError: n even
        OperandNotInDomain: Decay check failed
        QuadratureFailure: A piece of the integral did not converge
    """
    n = validate_dimension(n)
    if n % 2 == 0:
        raise DomainError(f"half_laplacian needs odd n, got {n}")
    cfg = cfg or HalfLapConfig.for_dimension(n)
    if p.is_constant:
        return OperatorResult(grid, np.zeros(len(grid)), np.zeros(len(grid)), operand_decay_verified=True)
    report = decay_check(p, n)
    if not report.l_half:
        label = factor or p.name
        raise OperandNotInDomain(f"{label} is not in L_1/2 (tail {p.tail.kind.value}, exponent {p.tail.leading_exponent:.3g})", label)

    values = np.empty(len(grid))
    errors = np.empty(len(grid))
    for i, r in enumerate(grid.nodes):
        values[i], errors[i] = _half_laplacian_at(p, float(r), n, cfg)
    _logger.debug("half_laplacian %s: %d radii, max error %.3g", p.name, len(grid), float(np.max(errors)))
    return OperatorResult(grid, values, errors, operand_decay_verified=True)


def half_laplacian_profile(
    p: RadialProfile, n: int, nodes: np.ndarray, cfg: HalfLapConfig | None = None, *, tail: TailModel | None = None
) -> RadialProfile:
    """Half-Laplacian tabulated on nodes (first node <= 1e-3) as a sampled profile; the tail is fitted unless given."""
    nodes = np.asarray(nodes, dtype=np.float64)
    result = half_laplacian(p, RadialGrid.explicit(nodes[nodes > 0]), n, cfg)
    radii = result.grid.nodes
    values = result.values
    if nodes[0] == 0.0:
        origin = _half_laplacian_at(p, 0.0, n, cfg or HalfLapConfig.for_dimension(n))[0]
        radii = np.concatenate([[0.0], radii])
        values = np.concatenate([[origin], values])
    return sampled_profile(np.column_stack([radii, values]), tail=tail, name=f"(-Δ)^1/2[{p.name}]")


# =============================================================================
# Fourier oracle
# =============================================================================


def _bessel_kernel(z: np.ndarray, n: int) -> np.ndarray:
    """Lambda_n(z) = Gamma(n/2) (2/z)^{(n-2)/2} J_{(n-2)/2}(z), Lambda_n(0) = 1."""
    z = np.asarray(z, dtype=np.float64)
    ell = (n - 3) // 2
    nu = (n - 2) / 2.0
    scale = gamma(n / 2.0) * 2.0**nu * math.sqrt(2.0 / math.pi)
    out = np.ones_like(z)
    nonzero = z > 1e-8
    zz = z[nonzero]
    out[nonzero] = scale * spherical_jn(ell, zz) / zz**ell
    return out


def _oracle_range(p: RadialProfile) -> float | None:
    """Finite integration range for rapidly decaying operands, None for power tails."""
    tail = p.tail
    if p.support is not None:
        return p.support[1]
    if tail.vanishes and p.nodes is not None:
        return float(p.nodes[-1])
    if tail.kind == TailKind.GAUSSIAN:
        return (40.0 / tail.offset) ** (1.0 / tail.leading_exponent) + 1.0
    return None


def _radial_fourier(p: RadialProfile, k: float, n: int, cutoff: float | None) -> float:
    """F(k) = |S^{n-1}| int p(s) Lambda_n(k s) s^{n-1} ds."""
    area = sphere_area(n - 1)
    if n == 3:
        if k == 0.0:
            upper = cutoff if cutoff is not None else np.inf
            return area * quad(lambda s: p(s) * s * s, 0.0, upper, 1e-13, label="fourier_k0")[0]
        if cutoff is not None:
            value = quad(lambda s: p(s) * s, 0.0, cutoff, 1e-13, weight="sin", wvar=k, label="fourier_qawo")[0]
        elif k > 1.0:
            value = quad(lambda s: p(s) * s, 0.0, np.inf, 1e-13, weight="sin", wvar=k, label="fourier_qawf")[0]
        else:
            value = quad(lambda s: p(s) * s * math.sin(k * s), 0.0, np.inf, 1e-13, label="fourier_low_k")[0]
        return area * value / k
    power = n - 1
    value = quad(
        lambda s: p(s) * float(_bessel_kernel(np.array([k * s]), n)[0]) * s**power,
        0.0,
        cutoff,
        1e-13,
        label="fourier_bessel",
    )[0]
    return area * value


def halflap_fourier_oracle(p: RadialProfile, r_points, n: int) -> np.ndarray:
    """
    Half-Laplacian through the radial Fourier transform: transform, multiply by |xi|, invert.

    Independent of the principal-value path; used as ground truth for it.

    Raises:
        OracleInapplicable: Slowly decaying operand, or a power tail outside n = 3
    """
    n = validate_dimension(n)
    if n % 2 == 0:
        raise DomainError(f"the Fourier oracle is implemented for odd n, got {n}")
    tail = p.tail
    rapid = tail.vanishes or tail.kind == TailKind.GAUSSIAN
    if p.is_constant or not (rapid or (tail.kind == TailKind.POWER and tail.leading_exponent < -n)):
        raise OracleInapplicable(f"{p.name}: Fourier oracle needs rapid decay (tail {tail.kind.value})")
    cutoff = _oracle_range(p)
    if cutoff is None and n != 3:
        raise OracleInapplicable(f"{p.name}: power-law tails are supported by the oracle only for n=3")

    f0 = abs(_radial_fourier(p, 0.0, n, cutoff))
    k_max = 1.0
    while k_max < 256.0 and abs(_radial_fourier(p, k_max, n, cutoff)) * k_max**n > 1e-12 * max(f0, 1e-300):
        k_max *= 2.0
    ks = np.linspace(0.0, k_max, 1025)
    transform = np.array([_radial_fourier(p, float(k), n, cutoff) for k in ks])
    spline = CubicSpline(ks, transform)

    area = sphere_area(n - 1)
    inverse_scale = area / (2.0 * math.pi) ** n
    points = np.atleast_1d(np.asarray(r_points, dtype=np.float64))
    out = np.empty(len(points))
    for i, r in enumerate(points):
        if n == 3 and r > 0.0:
            value = quad(lambda k: k * k * float(spline(k)), 0.0, k_max, 1e-14, weight="sin", wvar=r, label="oracle_inverse")[0]
            out[i] = inverse_scale * value / r
        else:
            power = n

            def integrand(k: float, r=r, power=power) -> float:
                return k**power * float(spline(k)) * float(_bessel_kernel(np.array([k * r]), n)[0])

            out[i] = inverse_scale * quad(integrand, 0.0, k_max, 1e-14, label="oracle_inverse")[0]
    return out


# =============================================================================
# Polyharmonic operator
# =============================================================================


def polyharmonic(metric: ConformalMetric, grid: RadialGrid, cfg: HalfLapConfig | None = None) -> OperatorResult:
    """
    (-Delta)^{n/2} u, the density Q e^{nu}.

    Even n iterates the Laplacian. Odd n applies the half-Laplacian to (-Delta)^{(n-1)/2} u.

    Raises:
        OperandNotInDomain: (-Delta)^{(n-1)/2} u fails the L_1/2 check (named in .factor)
    """
    n, u = metric.n, metric.u
    if n % 2 == 0:
        return iterate_laplacian(u, n // 2, grid, n)
    m = (n - 1) // 2
    operand = laplacian_profile(u, m, n)
    factor = f"(-Δ)^{m} u" if m else "u"
    return half_laplacian(operand, grid, n, cfg, factor=factor)
