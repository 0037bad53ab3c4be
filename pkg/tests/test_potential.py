"""Tests for the log kernel, total mass, the logarithmic potential and ball averages."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.qcurv.errors import DomainError, OperandNotInDomain, UnsupportedCheck
from src.qcurv.numerics import RadialGrid
from src.qcurv.potential import (
    alpha_of,
    ball_average,
    greens_property_check,
    log_kernel,
    log_kernel_quadrature,
    log_potential,
    log_potential_derivative,
    log_potential_laplacian,
    potential_profile,
    scaled_density,
)
from src.qcurv.profiles import TailKind, builtin_profile


class TestLogKernel:
    """Spherical means of log|x - y|."""

    def test_planar(self):
        """n=2: the mean is log max(r, s)."""
        assert log_kernel(1.0, 3.0, 2) == pytest.approx(math.log(3.0))
        assert log_kernel(3.0, 1.0, 2) == pytest.approx(math.log(3.0))

    def test_origin(self):
        """At r = 0 the mean is log s."""
        assert log_kernel(0.0, 2.0, 3) == pytest.approx(math.log(2.0))

    def test_undefined_at_double_origin(self):
        """r = s = 0 has no mean."""
        with pytest.raises(DomainError):
            log_kernel(0.0, 0.0, 3)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("r,s", [(1.0, 2.0), (2.0, 0.7), (1.0, 1.0), (0.05, 3.0)])
    def test_matches_quadrature(self, n, r, s):
        """Closed forms and series agree with polar-angle quadrature."""
        assert log_kernel(r, s, n) == pytest.approx(log_kernel_quadrature(r, s, n), rel=1e-9, abs=1e-11)

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(min_value=0.01, max_value=100.0),
        st.floats(min_value=0.01, max_value=100.0),
        st.integers(min_value=2, max_value=6),
    )
    def test_symmetric(self, r, s, n):
        """A(r, s) = A(s, r)."""
        assert log_kernel(r, s, n) == pytest.approx(log_kernel(s, r, n), rel=1e-12, abs=1e-12)


class TestAlpha:
    """Total mass and its normalized value."""

    def test_sphere_density(self):
        """16 / (1 + r^2)^3 in n=3 integrates to 4 pi^2, alpha = 2."""
        mass = alpha_of(builtin_profile("rational", {"amplitude": 16.0, "power": 3.0}), 3)
        assert mass.integral == pytest.approx(4 * math.pi**2, rel=1e-7)
        assert mass.alpha == pytest.approx(2.0, rel=1e-7)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_bump_normalized(self, n):
        """The bump is scaled to its requested alpha."""
        assert alpha_of(builtin_profile("bump", {"alpha": 0.5, "n": n}), n).alpha == pytest.approx(0.5, rel=1e-7)

    def test_scaled_sphere_density(self):
        """The sphere density rescales to alpha = 1."""
        assert alpha_of(scaled_density("sphere", 1.0, 3), 3).alpha == pytest.approx(1.0, rel=1e-7)

    def test_not_integrable(self):
        """(1 + r^2)^{-1} is not integrable in n=3."""
        with pytest.raises(OperandNotInDomain):
            alpha_of(builtin_profile("rational"), 3)

    def test_unknown_density(self):
        """Only bump and sphere densities are scaled."""
        with pytest.raises(DomainError):
            scaled_density("gaussian", 1.0, 3)


class TestLogPotential:
    """L(f) and its derivatives."""

    def test_origin(self):
        """L(f)(0) = 0."""
        assert log_potential(builtin_profile("bump", {"alpha": 0.5, "n": 3}), [0.0], 3)[0] == 0.0

    def test_planar_far_field_exact(self):
        """n=2, outside the support: L(f) = -alpha log r + const exactly."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 2})
        values = log_potential(f, [10.0, 100.0], 2)
        assert (values[1] - values[0]) / math.log(10.0) == pytest.approx(-0.5, rel=1e-7)
        assert log_potential_derivative(f, [10.0], 2)[0] == pytest.approx(-0.05, rel=1e-7)

    def test_far_field_slope(self):
        """n=3: the slope against log r tends to -alpha."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 3})
        values = log_potential(f, [1e3, 1e4], 3)
        assert (values[1] - values[0]) / math.log(10.0) == pytest.approx(-0.5, abs=1e-5)

    def test_planar_laplacian(self):
        """n=2: Delta L(f) = -f."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 2})
        assert log_potential_laplacian(f, [1.0], 2)[0] == pytest.approx(-f(1.0))

    def test_laplacian_far_field(self):
        """n=3, far away: Delta L(f) ~ -(n-2) alpha / r^2."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 3})
        value = log_potential_laplacian(f, [1e3], 3)[0]
        assert value * 1e6 == pytest.approx(-0.5, rel=1e-3)

    def test_not_integrable(self):
        """L is only defined for integrable densities."""
        with pytest.raises(OperandNotInDomain):
            log_potential(builtin_profile("rational"), [1.0], 3)


@pytest.mark.slow
class TestPotentialProfile:
    """Tabulated potentials used as conformal factors."""

    def test_bump_profile(self):
        """Derivatives and the log tail of L(bump) in n=3."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 3})
        u = potential_profile(f, 3)
        assert u.tail.kind == TailKind.LOG
        assert u.tail.leading_coefficient == pytest.approx(-0.5, rel=1e-7)
        r = np.array([0.3, 1.0, 4.0])
        assert u(r) == pytest.approx(log_potential(f, r, 3), rel=1e-5, abs=1e-8)
        assert u(r, 1) == pytest.approx(log_potential_derivative(f, r, 3), rel=1e-4, abs=1e-8)

    def test_greens_property_planar(self):
        """-Delta L(f) recovers f in n=2."""
        f = builtin_profile("bump", {"alpha": 0.5, "n": 2})
        grid = RadialGrid.explicit(np.linspace(0.55, 1.45, 19))
        residual = greens_property_check(f, grid, 2)
        assert residual.max_relative_residual < 1e-2


class TestGreensScope:
    """The Green's property check is limited to n in {2, 4}."""

    @pytest.mark.parametrize("n", [3, 6])
    def test_unsupported(self, n):
        """Odd n and n = 6 are refused."""
        grid = RadialGrid.explicit(np.linspace(0.6, 1.4, 9))
        with pytest.raises(UnsupportedCheck):
            greens_property_check(builtin_profile("gaussian"), grid, n)


class TestBallAverage:
    """Exact radial reduction of ball averages."""

    def test_constant(self):
        """The average of a constant is the constant."""
        assert ball_average(builtin_profile("constant", {"value": 2.5}), 3.0, 1.0, 3) == pytest.approx(2.5, rel=1e-7)

    @pytest.mark.parametrize(
        "center,radius,n",
        [(2.0, 1.0, 3), (0.5, 1.0, 3), (3.0, 2.0, 2), (1.0, 0.25, 5)],
    )
    def test_r_squared(self, center, radius, n):
        """Average of |y|^2 over B_R(x) = |x|^2 + n R^2 / (n + 2)."""
        expected = center**2 + n * radius**2 / (n + 2)
        value = ball_average(builtin_profile("monomial", {"k": 1}), center, radius, n)
        assert value == pytest.approx(expected, rel=1e-7)

    def test_bad_radius(self):
        """Radius must be positive."""
        with pytest.raises(DomainError):
            ball_average(builtin_profile("flat"), 1.0, 0.0, 3)
