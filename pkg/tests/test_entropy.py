"""Tests for metric ball volumes, tau, h and ray distances."""

import math

import numpy as np
import pytest

from src.qcurv.entropy import (
    Completeness,
    h_estimate,
    ray_distance,
    tau_estimate,
    volume_curve,
    volume_grid,
)
from src.qcurv.errors import DomainError
from src.qcurv.numerics import RadialGrid
from src.qcurv.profiles import ConformalMetric, builtin_profile, composite_profile

GROWTH_GRID = RadialGrid.geometric(1e-2, 1e3, 61)


class TestVolumeCurve:
    """V_g(B_R) in log space."""

    def test_default_grid(self):
        """[1e-3, 1e6] with 181 nodes."""
        grid = volume_grid()
        assert len(grid) == 181
        assert grid.r_max == pytest.approx(1e6)

    def test_flat_ball(self):
        """Flat n=3: V(R) = 4 pi R^3 / 3."""
        radii = np.geomspace(0.5, 2.0, 12)
        curve = volume_curve(ConformalMetric(3, builtin_profile("flat")), radii)
        assert curve.volumes == pytest.approx(4.0 * math.pi / 3.0 * radii**3, rel=1e-7)

    def test_sphere_saturates(self):
        """The round S^3 has total volume 2 pi^2."""
        curve = volume_curve(ConformalMetric(3, builtin_profile("sphere")), GROWTH_GRID)
        assert curve.volumes[-1] == pytest.approx(2 * math.pi**2, rel=1e-6)

    def test_huge_volume_stays_in_log_space(self):
        """u = r^2: log V(1e3) is about 3e6 and V is reported as inf."""
        curve = volume_curve(ConformalMetric(3, builtin_profile("monomial", {"k": 1})), GROWTH_GRID)
        assert curve.log_volumes[-1] == pytest.approx(3e6, rel=1e-5)
        assert curve.volumes[-1] == math.inf
        assert np.all(np.diff(curve.log_volumes) > 0)

    def test_too_few_radii(self):
        """At least 12 radii are needed."""
        with pytest.raises(DomainError):
            volume_curve(ConformalMetric(3, builtin_profile("flat")), np.geomspace(1.0, 2.0, 8))

    def test_explicit_grid_refused(self):
        """Only geometric grids are accepted."""
        grid = RadialGrid.explicit(np.linspace(1.0, 2.0, 12))
        with pytest.raises(DomainError):
            volume_curve(ConformalMetric(3, builtin_profile("flat")), grid)


class TestTau:
    """Polynomial volume growth rate."""

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_flat(self, n):
        """Euclidean balls: tau = 1."""
        tau = tau_estimate(volume_curve(ConformalMetric(n, builtin_profile("flat"))))
        assert tau.value == pytest.approx(1.0, abs=1e-6)
        assert not tau.diverging and not tau.inconclusive

    def test_sphere(self):
        """Finite volume: tau = 0."""
        tau = tau_estimate(volume_curve(ConformalMetric(3, builtin_profile("sphere"))))
        assert tau.value == pytest.approx(0.0, abs=1e-3)

    def test_log_metric(self):
        """u = -0.5 log r at infinity in n=3: V grows like R^{1.5}, tau = 0.5."""
        u = composite_profile([(builtin_profile("sphere"), 0.25)])
        tau = tau_estimate(volume_curve(ConformalMetric(3, u)))
        assert tau.value == pytest.approx(0.5, abs=1e-3)

    def test_diverging(self):
        """u = r^2 grows faster than any power."""
        tau = tau_estimate(volume_curve(ConformalMetric(3, builtin_profile("monomial", {"k": 1})), GROWTH_GRID))
        assert tau.diverging
        assert tau.value == math.inf
        assert tau.local_slopes[-1] > 30.0


class TestH:
    """Exponential volume growth rate."""

    def test_polynomial_growth(self):
        """Flat balls give h = 0."""
        curve = volume_curve(ConformalMetric(3, builtin_profile("flat")), GROWTH_GRID)
        h = h_estimate(curve)
        assert h.value == 0.0
        assert h.snapped == 0

    @pytest.mark.parametrize("k,n", [(1, 3), (2, 5)])
    def test_monomial(self, k, n):
        """u = r^{2k}: log V ~ n r^{2k}, h = 2k."""
        curve = volume_curve(ConformalMetric(n, builtin_profile("monomial", {"k": k})), GROWTH_GRID)
        h = h_estimate(curve)
        assert h.diverging
        assert h.value == pytest.approx(2 * k, abs=0.05)
        assert h.snapped == 2 * k


class TestRayDistance:
    """Distance to infinity along a ray."""

    def test_flat(self):
        """D(R) = R and the flat metric is complete."""
        ray = ray_distance(ConformalMetric(3, builtin_profile("flat")), 2.0)
        assert ray.distance == pytest.approx(2.0, rel=1e-9)
        assert ray.completeness == Completeness.COMPLETE
        assert ray.distance_to_infinity == math.inf

    def test_sphere_incomplete(self):
        """int_0^inf 2 / (1 + r^2) dr = pi."""
        ray = ray_distance(ConformalMetric(3, builtin_profile("sphere")), 1.0)
        assert ray.distance == pytest.approx(math.pi / 2, rel=1e-7)
        assert ray.completeness == Completeness.INCOMPLETE
        assert ray.distance_to_infinity == pytest.approx(math.pi, rel=1e-7)

    def test_critical_exponent_inconclusive(self):
        """u ~ -log r sits on the boundary."""
        u = composite_profile([(builtin_profile("sphere"), 0.5)])
        assert ray_distance(ConformalMetric(3, u), 10.0).completeness == Completeness.INCONCLUSIVE

    def test_positive_radius(self):
        """R = 0 is rejected."""
        with pytest.raises(DomainError):
            ray_distance(ConformalMetric(3, builtin_profile("flat")), 0.0)
