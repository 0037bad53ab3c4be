"""Tests for radial profiles, tail models and the builtin family registry."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.qcurv import profiles as profiles_module
from src.qcurv.errors import Inconclusive, InsufficientSmoothness, InvalidDimension, InvalidSpec
from src.qcurv.profiles import (
    ConformalMetric,
    TailKind,
    TailModel,
    builtin_profile,
    composite_profile,
    decay_check,
    dominant_tail,
    fit_tail,
    read_table,
    sampled_profile,
    table_nodes,
    tabulate,
)


class TestBuiltinFamilies:
    """Closed-form values and derivatives of the analytic families."""

    def test_flat_is_constant(self):
        """u = 0 everywhere."""
        flat = builtin_profile("flat")
        assert flat.is_constant
        assert flat(np.array([0.0, 1.0, 1e3])) == pytest.approx([0.0, 0.0, 0.0])

    def test_sphere_values(self):
        """u = log 2 - log(1 + r^2), u' = -2r / (1 + r^2)."""
        sphere = builtin_profile("sphere")
        assert sphere(0.0) == pytest.approx(math.log(2.0))
        assert sphere(1.0) == pytest.approx(0.0, abs=1e-15)
        assert sphere(1.0, 1) == pytest.approx(-1.0)
        # u'' = (2r^2 - 2) / (1 + r^2)^2
        assert sphere(2.0, 2) == pytest.approx(6.0 / 25.0)

    def test_sphere_laplacian(self):
        """-Delta u = (6 + 2r^2) / (1 + r^2)^2 in n=3."""
        minus_lap = builtin_profile("sphere").laplacian_power(1, 3)
        assert minus_lap(0.0) == pytest.approx(6.0)
        assert minus_lap(1.0) == pytest.approx(2.0)

    def test_bilaplacian_r4(self):
        """(-Delta)^2 r^4 = 120 in n=3."""
        r4 = builtin_profile("monomial", {"k": 2})
        result = r4.laplacian_power(2, 3)
        assert result(np.array([0.0, 0.7, 5.0])) == pytest.approx([120.0, 120.0, 120.0])
        assert result.is_constant

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(min_value=1, max_value=4),
        st.integers(min_value=2, max_value=7),
        st.floats(min_value=0.1, max_value=3.0),
    )
    def test_monomial_laplacian_property(self, k, n, r):
        """-Delta r^{2k} = -2k (2k + n - 2) r^{2k-2}."""
        minus_lap = builtin_profile("monomial", {"k": k}).laplacian_power(1, n)
        expected = -2 * k * (2 * k + n - 2) * r ** (2 * k - 2)
        assert minus_lap(r) == pytest.approx(expected, rel=1e-10)

    def test_nonnormal(self):
        """u = r^2 - beta log(1 + r^2)."""
        u = builtin_profile("nonnormal", {"beta": 1.0})
        assert u(2.0) == pytest.approx(4.0 - math.log(5.0))
        assert u.tail.kind == TailKind.POLYNOMIAL
        assert u.tail.leading_exponent == 2.0

    def test_rational_and_gaussian(self):
        """Amplitude and power parameters with their defaults."""
        rational = builtin_profile("rational", {"amplitude": 16.0, "power": 3.0})
        assert rational(1.0) == pytest.approx(2.0)
        assert rational.tail.leading_exponent == -6.0
        gaussian = builtin_profile("gaussian")
        assert gaussian(2.0) == pytest.approx(math.exp(-2.0))
        assert gaussian(2.0, 1) == pytest.approx(-2.0 * math.exp(-2.0))

    def test_bump_support(self):
        """The bump vanishes outside [center - width, center + width]."""
        bump = builtin_profile("bump", {"alpha": 0.5, "n": 3})
        assert bump.support == (0.5, 1.5)
        assert bump(np.array([0.2, 0.5, 1.5, 3.0])) == pytest.approx([0.0] * 4)
        assert bump(1.0) > 0.0
        assert bump.tail.kind == TailKind.COMPACT


class TestBuiltinValidation:
    """Registry errors."""

    def test_unknown_family(self):
        """Unknown names are rejected."""
        with pytest.raises(InvalidSpec, match="unknown family 'torus'"):
            builtin_profile("torus")

    def test_missing_parameter_named(self):
        """A missing parameter is named in the violation."""
        with pytest.raises(InvalidSpec, match="beta"):
            builtin_profile("nonnormal")

    def test_unknown_parameter(self):
        """Extra parameters are rejected."""
        with pytest.raises(InvalidSpec, match="unknown parameter 'gamma'"):
            builtin_profile("sphere", {"gamma": 1.0})

    def test_monomial_needs_integer(self):
        """k must be a positive integer."""
        with pytest.raises(InvalidSpec):
            builtin_profile("monomial", {"k": 1.5})

    def test_bump_center_below_width(self):
        """The support must stay inside r >= 0."""
        with pytest.raises(InvalidSpec):
            builtin_profile("bump", {"alpha": 0.5, "n": 3, "center": 0.2, "width": 0.5})

    def test_metric_dimension(self):
        """Metrics need n >= 2."""
        with pytest.raises(InvalidDimension):
            ConformalMetric(1, builtin_profile("flat"))


class TestTailModels:
    """Tail fitting and composition."""

    def test_power_tail(self):
        """5 r^-4 is a power tail."""
        r = np.geomspace(1e3, 1e4, 10)
        tail = fit_tail(r, 5.0 * r**-4)
        assert tail.kind == TailKind.POWER
        assert tail.leading_exponent == pytest.approx(-4.0, abs=1e-8)
        assert tail.leading_coefficient == pytest.approx(5.0, rel=1e-6)
        assert tail.trusted

    def test_log_tail(self):
        """2 log r + 1 is a log tail with offset 1."""
        r = np.geomspace(1e3, 1e4, 10)
        tail = fit_tail(r, 2.0 * np.log(r) + 1.0)
        assert tail.kind == TailKind.LOG
        assert tail.leading_coefficient == pytest.approx(2.0)
        assert tail.offset == pytest.approx(1.0)

    def test_zero_tail(self):
        """All-zero samples are compact."""
        assert fit_tail(np.geomspace(1.0, 10.0, 8), np.zeros(8)).kind == TailKind.COMPACT

    def test_integrability(self):
        """r^{-e} is integrable in R^n exactly when e > n."""
        assert TailModel(TailKind.POWER, -4.0, 1.0).integrable(3)
        assert not TailModel(TailKind.POWER, -3.0, 1.0).integrable(3)
        assert TailModel(TailKind.GAUSSIAN, 2.0, 1.0, offset=0.5).integrable(3)
        assert not TailModel(TailKind.LOG, 0.0, -1.0).integrable(3)

    def test_l_half_boundary_refused(self):
        """Growth r^1 is the excluded boundary case."""
        assert TailModel(TailKind.POWER, 0.5, 1.0).in_l_half(3)
        assert not TailModel(TailKind.POLYNOMIAL, 1.0, 1.0).in_l_half(3)

    def test_dominant_tail(self):
        """Polynomial growth beats a log tail; log tails add."""
        quad = TailModel(TailKind.POLYNOMIAL, 2.0, 1.0)
        log = TailModel(TailKind.LOG, 0.0, -2.0, offset=1.0)
        assert dominant_tail([(quad, 1.0), (log, 3.0)]).kind == TailKind.POLYNOMIAL
        combined = dominant_tail([(log, 1.0), (log, 0.5)])
        assert combined.kind == TailKind.LOG
        assert combined.leading_coefficient == pytest.approx(-3.0)
        assert combined.offset == pytest.approx(1.5)


class TestComposite:
    """Weighted sums of profiles."""

    def test_values_and_laplacian(self):
        """r^2 + sphere keeps the exact Laplacian hook."""
        u = composite_profile([(builtin_profile("monomial", {"k": 1}), 1.0), (builtin_profile("sphere"), 1.0)])
        assert u(1.0) == pytest.approx(1.0)
        # -Delta r^2 = -6, -Delta sphere = 6 at r=0
        assert u.laplacian_power(1, 3)(0.0) == pytest.approx(0.0, abs=1e-12)

    def test_empty(self):
        """At least one part is needed."""
        with pytest.raises(InvalidSpec):
            composite_profile([])


class TestSampledProfiles:
    """Spline profiles over tables."""

    def test_sphere_table(self):
        """A tabulated sphere profile matches the closed form."""
        sphere = builtin_profile("sphere")
        sampled = tabulate(sphere, table_nodes(), name="sphere-table")
        r = np.array([0.01, 0.5, 2.0, 50.0])
        assert sampled(r) == pytest.approx(sphere(r), rel=1e-5, abs=1e-7)
        assert sampled(1.0, 1) == pytest.approx(-1.0, rel=1e-4)

    def test_tail_takes_over(self):
        """Beyond the last node the fitted log tail predicts -2 log r + log 2."""
        sphere = builtin_profile("sphere")
        sampled = tabulate(sphere, table_nodes())
        assert sampled.tail.kind == TailKind.LOG
        assert sampled.tail.leading_coefficient == pytest.approx(-2.0, rel=1e-6)
        assert sampled(1e7) == pytest.approx(sphere(1e7), rel=1e-6)

    def test_even_reflection(self):
        """u'(0) = 0 for sampled profiles."""
        nodes = np.geomspace(1e-3, 10.0, 40)
        sampled = tabulate(lambda r: r**2, nodes)
        assert sampled(0.0, 1) == pytest.approx(0.0, abs=1e-8)

    def test_linear_spline_has_no_second_derivative(self):
        """An order-1 table cannot supply u''."""
        sampled = tabulate(lambda r: r**2, np.geomspace(1e-3, 10.0, 40), interpolation_order=1)
        assert sampled(1.0, 1) == pytest.approx(2.0, rel=0.2)
        with pytest.raises(InsufficientSmoothness):
            sampled(1.0, 2)

    def test_untrusted_tail_warns_once(self, monkeypatch):
        """Extrapolating with an untrusted tail logs a single warning."""
        messages = []
        monkeypatch.setattr(profiles_module._logger, "warning", lambda msg, *args: messages.append(msg % args))
        tail = TailModel(TailKind.LOG, 0.0, -2.0, math.log(2.0), trusted=False)
        sampled = tabulate(builtin_profile("sphere"), table_nodes(), tail=tail)
        sampled(np.array([0.5, 2.0]))
        assert messages == []
        sampled(1e7)
        sampled(3e7)
        assert len(messages) == 1
        assert "untrusted" in messages[0]

    def test_violations_collected(self):
        """Every table problem is reported at once."""
        table = np.column_stack([np.linspace(1.0, 2.0, 5), np.ones(5)])
        with pytest.raises(InvalidSpec) as excinfo:
            sampled_profile(table, interpolation_order=2)
        assert len(excinfo.value.violations) == 3

    def test_read_table(self, tmp_path):
        """Comments, commas and whitespace separators are accepted."""
        path = tmp_path / "u.dat"
        path.write_text("# radius value\n0.0 1.0\n1.0, 2.0\n2.0\t3.0\n", encoding="utf-8")
        table = read_table(path)
        assert table.shape == (3, 2)
        assert table[1].tolist() == [1.0, 2.0]

    def test_read_table_wrong_columns(self, tmp_path):
        """Three columns are rejected."""
        path = tmp_path / "bad.dat"
        path.write_text("0 1 2\n1 2 3\n", encoding="utf-8")
        with pytest.raises(InvalidSpec):
            read_table(path)


class TestDecayCheck:
    """Membership proxies from tail models."""

    def test_gaussian(self):
        """A Gaussian is integrable and in L_{1/2}."""
        report = decay_check(builtin_profile("gaussian"), 3)
        assert report.integrable and report.l_half
        # head integral of e^{-r^2/2} r^2 over [0, 100]
        assert report.head_integrable == pytest.approx(math.sqrt(math.pi / 2), rel=1e-6)

    def test_slow_rational(self):
        """(1 + r^2)^{-1} is in L_{1/2} but not integrable in n=3."""
        report = decay_check(builtin_profile("rational"), 3)
        assert report.l_half
        assert not report.integrable

    def test_untrusted_tail(self):
        """An unstable tail cannot be classified."""
        f = builtin_profile("gaussian")
        shaky = type(f)(f.name, f.evaluator, TailModel(TailKind.POWER, -1.0, 1.0, trusted=False, stability=1.0))
        with pytest.raises(Inconclusive):
            decay_check(shaky, 3)
