"""Radial profiles: conformal factors u(r) and densities f(r).

Builtin families are smooth functions F(t) of t = r^2 with closed-form derivatives of
every order, so radial derivatives and iterated Laplacians are exact. Sampled profiles
are splines over an evenly reflected table.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.interpolate import make_interp_spline
from scipy.special import poch

from src.common.config import FIT_CONFIG, GRID_CONFIG
from src.common.logging import get_logger
from src.qcurv.errors import DomainError, Inconclusive, InsufficientSmoothness, InvalidSpec, QuadratureFailure
from src.qcurv.numerics import dimension_constants, fit_loglog_slope, integrate_radial, validate_dimension

_logger = get_logger(__name__)

_fit_cfg = FIT_CONFIG

# Radii over which tail models of analytic families are fitted
_TAIL_SPAN = (1e3, 1e5)


# =============================================================================
# Tail models
# =============================================================================


class TailKind(str, Enum):
    """Asymptotic class of a profile as r -> infinity."""

    POWER = "power"
    LOG = "log"
    GAUSSIAN = "gaussian-type"
    POLYNOMIAL = "polynomial-growth"
    COMPACT = "compact"


@dataclass(frozen=True)
class TailModel:
    """
    Leading behaviour at infinity.

    power / polynomial-growth: c r^e
    log: c log r + offset
    gaussian-type: c exp(-offset r^e)
    compact: 0
    """

    kind: TailKind
    leading_exponent: float = 0.0
    leading_coefficient: float = 0.0
    offset: float = 0.0
    trusted: bool = True
    stability: float = 0.0

    def predict(self, r, order: int = 0) -> np.ndarray:
        """Tail value (order 0) or radial derivative (orders 1, 2)."""
        r = np.asarray(r, dtype=np.float64)
        c, e = self.leading_coefficient, self.leading_exponent
        if self.kind in (TailKind.POWER, TailKind.POLYNOMIAL):
            factor = [1.0, e, e * (e - 1.0)][order]
            return c * factor * r ** (e - order)
        if self.kind == TailKind.LOG:
            if order == 0:
                return c * np.log(r) + self.offset
            return c * (1.0 / r if order == 1 else -1.0 / r**2)
        if self.kind == TailKind.GAUSSIAN:
            rate = self.offset
            value = c * np.exp(-rate * r**e)
            if order == 0:
                return value
            g1 = -rate * e * r ** (e - 1.0)
            if order == 1:
                return value * g1
            g2 = -rate * e * (e - 1.0) * r ** (e - 2.0)
            return value * (g1**2 + g2)
        return np.zeros_like(r)

    @property
    def vanishes(self) -> bool:
        return self.kind == TailKind.COMPACT or self.leading_coefficient == 0.0

    def integrable(self, n: int) -> bool:
        """Whether |f| r^{n-1} is integrable at infinity."""
        if self.vanishes or self.kind == TailKind.GAUSSIAN:
            return True
        if self.kind == TailKind.POWER:
            return self.leading_exponent < -n
        return False

    def in_l_half(self, n: int) -> bool:
        """Whether |f| r^{n-1} / (1 + r^{n+1}) is integrable at infinity; the boundary case is refused."""
        if self.vanishes or self.kind in (TailKind.GAUSSIAN, TailKind.LOG):
            return True
        return self.leading_exponent < 1.0


def fit_tail(r: Sequence[float], v: Sequence[float]) -> TailModel:
    """
    Fit a tail model to trailing samples.

    Args:
        r: Increasing radii (typically the last decade of a table)
        v: Values at r

    Returns:
        TailModel; trusted is False when the slope stability band is wider than the config allows.
    """
    r = np.asarray(r, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    scale = float(np.max(np.abs(v))) if len(v) else 0.0
    if scale == 0.0:
        return TailModel(TailKind.COMPACT)
    if np.ptp(v) <= 1e-9 * scale:
        return TailModel(TailKind.POWER, 0.0, float(np.mean(v)))

    lr = np.log(r)
    slope, intercept = np.polyfit(lr, v, 1)
    rms = float(np.sqrt(np.mean((v - (slope * lr + intercept)) ** 2)))
    if rms <= 1e-6 * scale and abs(slope) * (lr[-1] - lr[0]) > 1e-6 * scale:
        return TailModel(TailKind.LOG, 0.0, float(slope), offset=float(intercept))

    if np.all(v > 0) or np.all(v < 0):
        sign = 1.0 if v[0] > 0 else -1.0
        fit = fit_loglog_slope(r, np.abs(v), fraction=1.0, min_points=min(_fit_cfg.min_points, len(r)))
        kind = TailKind.POLYNOMIAL if fit.slope > 1e-6 else TailKind.POWER
        return TailModel(
            kind,
            fit.slope,
            sign * math.exp(fit.intercept),
            trusted=fit.stability <= _fit_cfg.tail_stability,
            stability=fit.stability,
        )
    return TailModel(TailKind.POWER, 0.0, 0.0, trusted=False, stability=math.inf)


def dominant_tail(tails: Sequence[tuple[TailModel, float]]) -> TailModel:
    """Tail of a weighted sum: the fastest-growing part wins; equal classes add."""

    def rank(tail: TailModel) -> tuple[int, float]:
        if tail.vanishes:
            return (0, 0.0)
        if tail.kind == TailKind.POLYNOMIAL:
            return (4, tail.leading_exponent)
        if tail.kind == TailKind.LOG:
            return (3, 0.0)
        if tail.kind == TailKind.POWER:
            return (2, tail.leading_exponent)
        return (1, -tail.offset)

    scaled = [(t, w) for t, w in tails if w != 0.0]
    if not scaled:
        return TailModel(TailKind.COMPACT)
    best = max(rank(t) for t, _ in scaled)
    if best == (0, 0.0):
        return TailModel(TailKind.COMPACT)
    lead = [(t, w) for t, w in scaled if rank(t) == best]
    base = lead[0][0]
    coefficient = sum(t.leading_coefficient * w for t, w in lead)
    offset = sum(t.offset * w for t, w in lead) if base.kind == TailKind.LOG else base.offset
    if base.kind == TailKind.LOG:
        # constants ride along in the additive offset
        offset += sum(t.leading_coefficient * w for t, w in scaled if rank(t) == (2, 0.0))
    return TailModel(
        base.kind,
        base.leading_exponent,
        coefficient,
        offset=offset,
        trusted=all(t.trusted for t, _ in scaled),
        stability=max(t.stability for t, _ in scaled),
    )


# =============================================================================
# Profiles
# =============================================================================


class Smoothness(str, Enum):
    ANALYTIC = "analytic"
    SAMPLED = "sampled"


Evaluator = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class DecayClass:
    """Membership flags derived from the tail model (profile-level proxies)."""

    integrable: bool  # |f| r^{n-1} integrable at infinity
    l_half: bool  # L_{1/2}-type decay
    trusted: bool


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """
    A radial function with derivatives of order 0, 1, 2 and a tail model.

    Attributes:
        name: Display name
        evaluator: (r array, order) -> values
        tail: Asymptotic model used for truncated integrals
        smoothness: analytic or sampled
        laplacian_power: Optional exact hook (m, n) -> profile of (-Delta)^m
        is_constant: Profile is a constant function
        support: (lo, hi) for compactly supported profiles
        nodes: Table radii for sampled profiles
        parts: Weighted parts for composites
    """

    name: str
    evaluator: Evaluator
    tail: TailModel
    smoothness: Smoothness = Smoothness.ANALYTIC
    laplacian_power: Callable[[int, int], "RadialProfile"] | None = None
    is_constant: bool = False
    support: tuple[float, float] | None = None
    nodes: np.ndarray | None = None
    parts: tuple[tuple["RadialProfile", float], ...] = field(default=())

    def __call__(self, r, order: int = 0):
        if order not in (0, 1, 2):
            raise DomainError(f"derivative order must be 0, 1 or 2, got {order}")
        scalar = np.ndim(r) == 0
        values = self.evaluator(np.atleast_1d(np.asarray(r, dtype=np.float64)), order)
        return float(values[0]) if scalar else values

    def decay_class(self, n: int) -> DecayClass:
        return DecayClass(self.tail.integrable(n), self.tail.in_l_half(n), self.tail.trusted)


@dataclass(frozen=True)
class ConformalMetric:
    """g = e^{2u} |dx|^2 on R^n."""

    n: int
    u: RadialProfile

    def __post_init__(self):
        validate_dimension(self.n)
        if not math.isfinite(self.u(0.0)):
            raise InvalidSpec(f"conformal factor {self.u.name} is not finite at r=0")


# =============================================================================
# Analytic families in t = r^2
# =============================================================================


class SquareFamily(Protocol):
    """F(t) with derivatives of every order; degree is set for polynomials."""

    degree: int | None

    def derivative(self, t: np.ndarray, k: int) -> np.ndarray: ...


class _LogPolynomialFamily:
    """F(t) = poly(t) + a log(1 + t)."""

    def __init__(self, coefficients: Sequence[float], log_coefficient: float = 0.0):
        self.poly = Polynomial(coefficients)
        self.log_coefficient = log_coefficient
        self.degree = None if log_coefficient else self.poly.degree()

    def derivative(self, t: np.ndarray, k: int) -> np.ndarray:
        out = (self.poly.deriv(k) if k else self.poly)(t) + np.zeros_like(t)
        a = self.log_coefficient
        if a:
            if k == 0:
                out = out + a * np.log1p(t)
            else:
                out = out + a * (-1) ** (k - 1) * math.factorial(k - 1) / (1.0 + t) ** k
        return out


class _RationalFamily:
    """F(t) = a (1 + t)^{-p}."""

    degree = None

    def __init__(self, amplitude: float, power: float):
        self.amplitude = amplitude
        self.power = power

    def derivative(self, t: np.ndarray, k: int) -> np.ndarray:
        return self.amplitude * (-1) ** k * poch(self.power, k) * (1.0 + t) ** (-self.power - k)


class _GaussianFamily:
    """F(t) = a exp(-rate t)."""

    degree = None

    def __init__(self, amplitude: float, rate: float = 0.5):
        self.amplitude = amplitude
        self.rate = rate

    def derivative(self, t: np.ndarray, k: int) -> np.ndarray:
        return self.amplitude * (-self.rate) ** k * np.exp(-self.rate * t)


_T = Polynomial([0.0, 1.0])


@dataclass(frozen=True)
class SquareForm:
    """Expression sum_k c_k(t) F^{(k)}(t) with polynomial coefficients c_k."""

    terms: tuple[tuple[int, Polynomial], ...]

    @classmethod
    def identity(cls) -> "SquareForm":
        return cls(((0, Polynomial([1.0])),))

    @staticmethod
    def _collect(pairs, degree: int | None) -> "SquareForm":
        merged: dict[int, Polynomial] = {}
        for k, c in pairs:
            if degree is not None and k > degree:
                continue
            merged[k] = merged[k] + c if k in merged else c
        kept = tuple(
            (k, c.trim()) for k, c in sorted(merged.items()) if np.any(c.coef != 0.0)
        )
        return SquareForm(kept)

    def dt(self, degree: int | None = None) -> "SquareForm":
        pairs = []
        for k, c in self.terms:
            pairs.append((k, c.deriv()))
            pairs.append((k + 1, c))
        return self._collect(pairs, degree)

    def laplacian(self, n: int, degree: int | None = None, scale: float = 1.0) -> "SquareForm":
        """scale * (4t d^2/dt^2 + 2n d/dt) applied to this form."""
        d1 = self.dt(degree)
        d2 = d1.dt(degree)
        pairs = [(k, c * _T * (4.0 * scale)) for k, c in d2.terms]
        pairs += [(k, c * (2.0 * n * scale)) for k, c in d1.terms]
        return self._collect(pairs, degree)

    def evaluate(self, family: SquareFamily, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        for k, c in self.terms:
            out = out + c(t) * family.derivative(t, k)
        return out

    def is_constant(self, degree: int | None) -> bool:
        if not self.terms:
            return True
        if degree is None:
            return False
        return all(c.degree() + degree - k <= 0 for k, c in self.terms)


def _square_profile(name: str, family: SquareFamily, form: SquareForm, tail: TailModel | None = None) -> RadialProfile:
    degree = family.degree
    d1 = form.dt(degree)
    d2 = d1.dt(degree)

    def evaluator(r: np.ndarray, order: int) -> np.ndarray:
        t = r * r
        if order == 0:
            return form.evaluate(family, t)
        if order == 1:
            return 2.0 * r * d1.evaluate(family, t)
        return 2.0 * d1.evaluate(family, t) + 4.0 * t * d2.evaluate(family, t)

    def laplacian_power(m: int, n: int) -> RadialProfile:
        result = form
        for _ in range(m):
            result = result.laplacian(n, degree, scale=-1.0)
        return _square_profile(f"(-Δ)^{m}[{name}]", family, result)

    constant = form.is_constant(degree)
    if tail is None:
        far = np.geomspace(*_TAIL_SPAN, 17)
        tail = fit_tail(far, evaluator(far, 0))
    return RadialProfile(
        name=name,
        evaluator=evaluator,
        tail=tail,
        laplacian_power=laplacian_power,
        is_constant=constant,
    )


# =============================================================================
# Bump density (compactly supported mollifier)
# =============================================================================


@lru_cache(maxsize=16)
def _mollifier_numerators(order: int) -> tuple[Polynomial, ...]:
    """P_k with phi^{(k)}(x) = phi(x) P_k(x) / (1 - x^2)^{2k}, phi = exp(-1/(1-x^2))."""
    polys = [Polynomial([1.0])]
    one_minus = Polynomial([1.0, 0.0, -1.0])
    x = Polynomial([0.0, 1.0])
    for k in range(order):
        p = polys[-1]
        polys.append(-2.0 * x * p + one_minus**2 * p.deriv() + 4.0 * k * x * one_minus * p)
    return tuple(polys)


def _mollifier(x: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    base = 1.0 - xi * xi
    phi = np.exp(-1.0 / base)
    out[inside] = phi * _mollifier_numerators(k)[k](xi) / base ** (2 * k)
    return out


@dataclass(frozen=True)
class _LaurentForm:
    """sum_j b_j(r) u^{(j)}(r) with b_j sums of c r^p."""

    terms: tuple[tuple[int, tuple[tuple[int, float], ...]], ...]

    @classmethod
    def identity(cls) -> "_LaurentForm":
        return cls(((0, ((0, 1.0),)),))

    @staticmethod
    def _collect(pairs) -> "_LaurentForm":
        merged: dict[int, dict[int, float]] = {}
        for j, p, c in pairs:
            if c:
                slot = merged.setdefault(j, {})
                slot[p] = slot.get(p, 0.0) + c
        return _LaurentForm(
            tuple((j, tuple((p, c) for p, c in sorted(b.items()) if c)) for j, b in sorted(merged.items()))
        )

    def _dr(self) -> list[tuple[int, int, float]]:
        pairs = []
        for j, b in self.terms:
            for p, c in b:
                pairs.append((j, p - 1, p * c))
                pairs.append((j + 1, p, c))
        return pairs

    def laplacian(self, n: int, scale: float = 1.0) -> "_LaurentForm":
        d1 = self._collect(self._dr())
        d2 = self._collect(d1._dr())
        pairs = [(j, p, scale * c) for j, b in d2.terms for p, c in b]
        pairs += [(j, p - 1, scale * (n - 1) * c) for j, b in d1.terms for p, c in b]
        return self._collect(pairs)

    def evaluate(self, derivative: Callable[[np.ndarray, int], np.ndarray], r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r)
        for j, b in self.terms:
            value = derivative(r, j)
            mask = value != 0.0
            if not np.any(mask):
                continue
            coeff = np.zeros_like(r)
            coeff[mask] = sum(c * r[mask] ** p for p, c in b)
            out = out + coeff * value
        return out

    def dr(self) -> "_LaurentForm":
        return self._collect(self._dr())


@lru_cache(maxsize=64)
def _bump_shape_integral(n: int, center: float, width: float) -> float:
    return integrate_radial(
        lambda r: float(_mollifier(np.array([(r - center) / width]), 0)[0]),
        n,
        center - width,
        center + width,
        1e-14,
    )


def _bump_profile(alpha: float, center: float, width: float, n: int) -> RadialProfile:
    dims = dimension_constants(n)
    if width <= 0 or center < width:
        raise InvalidSpec(f"bump needs width > 0 and center >= width, got center={center}, width={width}")
    amplitude = alpha / (dims.potential_factor * _bump_shape_integral(n, center, width))

    def derivative(r: np.ndarray, j: int) -> np.ndarray:
        return amplitude * _mollifier((r - center) / width, j) / width**j

    return _laurent_profile(
        f"bump(alpha={alpha:g}, center={center:g}, width={width:g})",
        derivative,
        _LaurentForm.identity(),
        (center - width, center + width),
    )


def _laurent_profile(
    name: str, derivative: Callable[[np.ndarray, int], np.ndarray], form: _LaurentForm, support: tuple[float, float]
) -> RadialProfile:
    d1 = form.dr()
    d2 = d1.dr()

    def evaluator(r: np.ndarray, order: int) -> np.ndarray:
        return (form, d1, d2)[order].evaluate(derivative, r)

    def laplacian_power(m: int, n: int) -> RadialProfile:
        result = form
        for _ in range(m):
            result = result.laplacian(n, scale=-1.0)
        return _laurent_profile(f"(-Δ)^{m}[{name}]", derivative, result, support)

    return RadialProfile(
        name=name,
        evaluator=evaluator,
        tail=TailModel(TailKind.COMPACT),
        laplacian_power=laplacian_power,
        support=support,
    )


# =============================================================================
# Builtin registry
# =============================================================================


@dataclass
class FamilyConfig:
    """Configuration for a builtin family.

    Attributes:
        name: Family identifier used in specs
        required: Parameters without defaults
        defaults: Optional parameters and their defaults
        build: Factory taking the resolved parameters
    """

    name: str
    required: tuple[str, ...]
    defaults: dict[str, float]
    build: Callable[..., RadialProfile]


def _flat() -> RadialProfile:
    return _square_profile("flat", _LogPolynomialFamily([0.0]), SquareForm.identity(), TailModel(TailKind.POWER))


def _constant(value: float) -> RadialProfile:
    family = _LogPolynomialFamily([value])
    return _square_profile(f"constant({value:g})", family, SquareForm.identity(), TailModel(TailKind.POWER, 0.0, value))


def _sphere() -> RadialProfile:
    family = _LogPolynomialFamily([math.log(2.0)], -1.0)
    return _square_profile("sphere", family, SquareForm.identity(), TailModel(TailKind.LOG, 0.0, -2.0, math.log(2.0)))


def _nonnormal(beta: float) -> RadialProfile:
    family = _LogPolynomialFamily([0.0, 1.0], -beta)
    tail = TailModel(TailKind.POLYNOMIAL, 2.0, 1.0)
    return _square_profile(f"nonnormal(beta={beta:g})", family, SquareForm.identity(), tail)


def _monomial(k: float) -> RadialProfile:
    if k != int(k) or k < 1:
        raise InvalidSpec(f"monomial needs an integer k >= 1, got {k}")
    k = int(k)
    family = _LogPolynomialFamily([0.0] * k + [1.0])
    return _square_profile(f"monomial(k={k})", family, SquareForm.identity(), TailModel(TailKind.POLYNOMIAL, 2.0 * k, 1.0))


def _gaussian(amplitude: float) -> RadialProfile:
    tail = TailModel(TailKind.GAUSSIAN, 2.0, amplitude, offset=0.5)
    return _square_profile(f"gaussian(amplitude={amplitude:g})", _GaussianFamily(amplitude), SquareForm.identity(), tail)


def _rational(amplitude: float, power: float) -> RadialProfile:
    if power <= 0:
        raise InvalidSpec(f"rational needs power > 0, got {power}")
    tail = TailModel(TailKind.POWER, -2.0 * power, amplitude)
    name = f"rational(amplitude={amplitude:g}, power={power:g})"
    return _square_profile(name, _RationalFamily(amplitude, power), SquareForm.identity(), tail)


def _bump(alpha: float, center: float, width: float, n: float) -> RadialProfile:
    if n != int(n):
        raise InvalidSpec(f"bump needs an integer dimension n, got {n}")
    return _bump_profile(alpha, center, width, int(n))


# Central family registry - add new families here
FAMILIES: list[FamilyConfig] = [
    FamilyConfig("flat", (), {}, _flat),
    FamilyConfig("constant", ("value",), {}, _constant),
    FamilyConfig("sphere", (), {}, _sphere),
    FamilyConfig("nonnormal", ("beta",), {}, _nonnormal),
    FamilyConfig("monomial", ("k",), {}, _monomial),
    FamilyConfig("gaussian", (), {"amplitude": 1.0}, _gaussian),
    FamilyConfig("rational", (), {"amplitude": 1.0, "power": 1.0}, _rational),
    FamilyConfig("bump", ("alpha", "n"), {"center": 1.0, "width": 0.5}, _bump),
]

FAMILY_NAMES: dict[str, FamilyConfig] = {f.name: f for f in FAMILIES}


def get_family_by_name(name: str) -> FamilyConfig | None:
    """Family config or None if not found."""
    return FAMILY_NAMES.get(name)


def builtin_profile(family: str, params: Mapping[str, float] | None = None) -> RadialProfile:
    """
    Build a builtin analytic profile.

    Args:
        family: One of flat, constant, sphere, nonnormal, monomial, gaussian, rational, bump
        params: Family parameters (beta; k; alpha, center, width, n; amplitude, power; value)

    Returns:
        Analytic RadialProfile with exact derivatives and tail model.

    Raises:
        InvalidSpec: Unknown family, missing or unknown parameters
    """
    config = get_family_by_name(family)
    if config is None:
        raise InvalidSpec(f"unknown family '{family}'")
    params = dict(params or {})
    violations = [f"{family}: missing parameter '{key}'" for key in config.required if key not in params]
    allowed = set(config.required) | set(config.defaults)
    violations += [f"{family}: unknown parameter '{key}'" for key in params if key not in allowed]
    if violations:
        raise InvalidSpec(violations)
    resolved = {**config.defaults, **params}
    return config.build(**{key: float(value) for key, value in resolved.items()})


# =============================================================================
# Composites and sampled data
# =============================================================================


def composite_profile(parts: Sequence[tuple[RadialProfile, float]]) -> RadialProfile:
    """
    Pointwise weighted sum of profiles.

    Raises:
        InvalidSpec: No parts given
    """
    parts = tuple((p, float(w)) for p, w in parts)
    if not parts:
        raise InvalidSpec("composite profile needs at least one part")

    def evaluator(r: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros_like(r)
        for profile, weight in parts:
            out = out + weight * profile.evaluator(r, order)
        return out

    hook = None
    if all(p.laplacian_power is not None for p, _ in parts):

        def hook(m: int, n: int) -> RadialProfile:
            return composite_profile([(p.laplacian_power(m, n), w) for p, w in parts])

    supports = [p.support for p, _ in parts]
    support = None
    if all(s is not None for s in supports):
        support = (min(s[0] for s in supports), max(s[1] for s in supports))
    smoothness = Smoothness.SAMPLED if any(p.smoothness == Smoothness.SAMPLED for p, _ in parts) else Smoothness.ANALYTIC
    return RadialProfile(
        name=" + ".join(f"{w:g}*{p.name}" for p, w in parts),
        evaluator=evaluator,
        tail=dominant_tail([(p.tail, w) for p, w in parts]),
        smoothness=smoothness,
        laplacian_power=hook,
        is_constant=all(p.is_constant or w == 0.0 for p, w in parts),
        support=support,
        parts=parts,
    )


def _table_arrays(table) -> tuple[np.ndarray, np.ndarray]:
    data = np.asarray(table, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidSpec("sampled table must have two columns (radius, value)")
    return data[:, 0].copy(), data[:, 1].copy()


def sampled_profile(
    table, interpolation_order: int = 3, *, tail: TailModel | None = None, name: str = "sampled"
) -> RadialProfile:
    """
    Spline profile over a (radius, value) table.

    The table is reflected evenly about r = 0 before fitting, so u'(0) = 0. Beyond the
    last node the tail model takes over; it is fitted on the last decade of samples
    unless given.

    Args:
        table: Two-column array-like, radii strictly increasing, first radius <= 1e-3
        interpolation_order: Spline degree, 1, 3 or 5
        tail: Optional known tail model
        name: Display name

    Raises:
        InvalidSpec: Fewer than 16 samples, non-monotone radii, bad first radius or order
    """
    r, v = _table_arrays(table)
    violations = []
    if len(r) < 16:
        violations.append(f"sampled profile needs at least 16 samples, got {len(r)}")
    if np.any(np.diff(r) <= 0):
        violations.append("sampled radii must be strictly increasing")
    if len(r) and not 0.0 <= r[0] <= 1e-3:
        violations.append(f"sampled table must start at a radius in [0, 1e-3], got {r[0]:g}")
    if interpolation_order not in (1, 3, 5):
        violations.append(f"interpolation order must be 1, 3 or 5, got {interpolation_order}")
    if not np.all(np.isfinite(v)):
        violations.append("sampled values must be finite")
    if violations:
        raise InvalidSpec(violations)

    if r[0] == 0.0:
        x = np.concatenate([-r[:0:-1], r])
        y = np.concatenate([v[:0:-1], v])
    else:
        x = np.concatenate([-r[::-1], r])
        y = np.concatenate([v[::-1], v])
    spline = make_interp_spline(x, y, k=interpolation_order)
    derivatives = [spline, spline.derivative(1)]
    derivatives.append(spline.derivative(2) if interpolation_order >= 2 else None)

    if tail is None:
        last_decade = r >= r[-1] / _fit_cfg.tail_decade
        if np.count_nonzero(last_decade) < 4:
            last_decade = np.arange(len(r)) >= len(r) - 4
        tail = fit_tail(r[last_decade], v[last_decade])
        if not tail.trusted:
            _logger.warning("%s: tail fit unstable (band %.3g)", name, tail.stability)
    r_last = r[-1]
    extrapolation_warned = False

    def evaluator(rr: np.ndarray, order: int) -> np.ndarray:
        nonlocal extrapolation_warned
        spline_d = derivatives[order]
        if spline_d is None:
            raise InsufficientSmoothness(
                f"{name}: an order-{interpolation_order} spline has no derivative of order {order}"
            )
        out = np.empty_like(rr)
        inside = rr <= r_last
        out[inside] = spline_d(rr[inside])
        if not np.all(inside):
            if not tail.trusted and not extrapolation_warned:
                _logger.warning("%s: extrapolating past r=%g with an untrusted tail model", name, r_last)
                extrapolation_warned = True
            out[~inside] = tail.predict(rr[~inside], order)
        return out

    nodes = r.copy()
    nodes.flags.writeable = False
    is_constant = bool(np.ptp(v) == 0.0)
    return RadialProfile(
        name=name,
        evaluator=evaluator,
        tail=tail,
        smoothness=Smoothness.SAMPLED,
        is_constant=is_constant,
        nodes=nodes,
    )


def tabulate(profile_fn: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, **kwargs) -> RadialProfile:
    """Sampled profile of a vectorized function on the given nodes."""
    nodes = np.asarray(nodes, dtype=np.float64)
    return sampled_profile(np.column_stack([nodes, profile_fn(nodes)]), **kwargs)


def read_table(path: str | Path) -> np.ndarray:
    """
    Read a two-column (radius, value) text table; '#' starts a comment.

    Raises:
        InvalidSpec: Unreadable file or wrong column count
    """
    try:
        df = pd.read_csv(path, comment="#", sep=r"[,\s]+", engine="python", header=None)
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise InvalidSpec(f"cannot read sampled table {path}: {e}") from e
    df = df.dropna(axis=1, how="all")
    if df.shape[1] != 2:
        raise InvalidSpec(f"sampled table {path} must have 2 columns, got {df.shape[1]}")
    return df.to_numpy(dtype=np.float64)


def table_nodes(support: tuple[float, float] | None = None) -> np.ndarray:
    """Dense table radii: geometric over the table span plus linear nodes across a support."""
    nodes = np.geomspace(GRID_CONFIG.table_r_min, GRID_CONFIG.table_r_max, GRID_CONFIG.table_count)
    if support is not None:
        lo, hi = support
        pad = 0.25 * (hi - lo)
        extra = np.linspace(max(lo - pad, GRID_CONFIG.table_r_min), hi + pad, GRID_CONFIG.support_nodes)
        nodes = np.union1d(nodes, extra)
        # drop near-duplicates that would make the spline ill-conditioned
        keep = np.concatenate([[True], np.diff(nodes) > 1e-9 * nodes[1:]])
        nodes = nodes[keep]
    return nodes


# =============================================================================
# Decay checks
# =============================================================================


@dataclass(frozen=True)
class DecayReport:
    """Membership report; both flags are proxies computed from the tail model."""

    l_half: bool
    integrable: bool
    head_l_half: float  # integral of |f| r^{n-1} / (1 + r^{n+1}) over the head
    head_integrable: float  # integral of |f| r^{n-1} over the head
    head_radius: float
    tail: TailModel
    note: str = "profile-level proxy"


def decay_check(f: RadialProfile, n: int) -> DecayReport:
    """
    L_{1/2} and integrability membership of f in dimension n.

    Raises:
        Inconclusive: The tail model is not trustworthy
    """
    n = validate_dimension(n)
    if not f.tail.trusted:
        raise Inconclusive(f"{f.name}: tail stability band {f.tail.stability:.3g} too wide to decide decay")
    if f.support is not None:
        head_radius = f.support[1]
    elif f.nodes is not None:
        head_radius = float(f.nodes[-1])
    else:
        head_radius = 100.0
    points = list(np.geomspace(1e-3, head_radius, 8)) if head_radius > 1e-3 else None
    try:
        head_integrable = integrate_radial(lambda r: abs(f(r)), n, 0.0, head_radius, points=points)
        head_l_half = integrate_radial(lambda r: abs(f(r)) / (1.0 + r ** (n + 1)), n, 0.0, head_radius, points=points)
    except QuadratureFailure as e:
        _logger.warning("%s: head integral failed: %s", f.name, e)
        head_integrable = head_l_half = math.inf
    finite = math.isfinite(head_integrable) and math.isfinite(head_l_half)
    return DecayReport(
        l_half=finite and f.tail.in_l_half(n),
        integrable=finite and f.tail.integrable(n),
        head_l_half=head_l_half,
        head_integrable=head_integrable,
        head_radius=head_radius,
        tail=f.tail,
    )
