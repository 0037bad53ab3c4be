"""Tests for individual checks, the check registry and the suite runner."""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.qcurv import verify
from src.qcurv.analysis import MetricAnalysis, analyze_metric
from src.qcurv.curvature import CurvatureReport, ScalarSign, ScalarSignReport
from src.qcurv.decomposition import DecompositionResult, Verdict
from src.qcurv.entropy import Completeness, EntropyEstimate, RayDistance
from src.qcurv.errors import DomainError, InvalidSpec, QuadratureFailure
from src.qcurv.numerics import RadialGrid
from src.qcurv.potential import TotalMass, alpha_of, potential_profile
from src.qcurv.profiles import ConformalMetric, builtin_profile
from src.qcurv.verify import (
    ANCHORS,
    CHECK_NAMES,
    CHECKS,
    CheckResult,
    SuiteConfig,
    SuiteEntry,
    check_alpha_range,
    check_area_law,
    check_ball_averages,
    check_blowdown_limits,
    check_cohn_vossen,
    check_farfield,
    check_greens_property,
    check_h_degree,
    check_h_theorem,
    check_halflap_composition,
    check_halflap_oracle,
    check_incompleteness,
    check_line_integral,
    check_mass_bound,
    check_scalar_conditional,
    check_scalar_limit,
    check_scalar_spot,
    check_shell_exponent,
    check_tau_formula,
    default_matrix,
    default_suite,
    density_from_params,
    get_check_by_name,
    metric_checks,
    run_suite,
)


def _spot(expected: float, **params) -> SuiteEntry:
    return SuiteEntry("scalar_spot", 3, {"family": "sphere", "expected": expected, **params})


def _analysis(
    n: int = 4,
    *,
    alpha0: float = 0.0,
    sign: ScalarSign = ScalarSign.NONNEGATIVE,
    tail: tuple[float, float] = (0.0, 0.0),
    completeness: Completeness = Completeness.COMPLETE,
    verdict: Verdict = Verdict.NORMAL,
    degree: int = 0,
    tau: float = 1.0,
    h: float = 0.0,
    snapped: int | None = 0,
) -> MetricAnalysis:
    """Hand-built analysis carrying only what the predicate checks read."""
    grid = RadialGrid.geometric(1e-2, 1e2, 16)
    zeros = np.zeros(len(grid))
    metric = ConformalMetric(n, builtin_profile("flat"))
    sign_report = ScalarSignReport(sign, tail[0], 1.0, None, tail[0], tail[1], zeros)
    curvature = CurvatureReport(
        grid, zeros, zeros, False, zeros, TotalMass(0.0, alpha0, n), tail[0], None, sign_report, metric.u
    )
    distance = 2.0 if completeness == Completeness.INCOMPLETE else math.inf
    diverging = h > 0.0
    return MetricAnalysis(
        metric,
        grid,
        curvature=curvature,
        tau=EntropyEstimate("tau", tau, tau, None, diverging),
        h=EntropyEstimate("h", h, h, None, diverging, snapped=snapped),
        ray=RayDistance(1e4, 1.0, completeness, distance),
        decomposition=DecompositionResult(grid, zeros, zeros, (0.0,), degree, 0.0, 0.0, verdict),
    )


@pytest.fixture(scope="module")
def sphere4():
    """Full analysis of the round S^4: normal, incomplete, R_g = 12, alpha_0 = 2."""
    return analyze_metric(ConformalMetric(4, builtin_profile("sphere")))


@pytest.fixture(scope="module")
def bump3():
    """Bump of mass alpha = 0.5 in n=3 and its logarithmic potential."""
    f = density_from_params(3, {"alpha": 0.5})
    return f, potential_profile(f, 3)


class TestCheckResult:
    """Status and anchor derivation."""

    def test_status(self):
        """Skipped wins over passed."""
        assert CheckResult("farfield", "s", 1.0, 1.0, 0.1, True).status == "pass"
        assert CheckResult("farfield", "s", 1.0, 2.0, 0.1, False).status == "fail"
        assert CheckResult("farfield", "s", None, None, 0.0, True, skipped=True).status == "skipped"

    def test_anchor(self):
        """Every registered check id has an anchor statement."""
        assert CheckResult("tau_formula", "s", 0.0, 0.0, 0.1, True).anchor == ANCHORS["tau_formula"]
        assert CheckResult("unknown", "s", 0.0, 0.0, 0.1, True).anchor == ""


class TestDensities:
    """Densities for the far-field checks."""

    def test_dipole_has_requested_mass(self):
        """The two opposite bumps cancel."""
        f = density_from_params(3, {"density": "dipole", "alpha": 0.0})
        assert alpha_of(f, 3).alpha == pytest.approx(0.0, abs=1e-7)

    def test_unknown_shape(self):
        """Only bump, sphere and dipole are known."""
        with pytest.raises(InvalidSpec):
            density_from_params(3, {"density": "gaussian", "alpha": 0.5})


class TestFarFieldChecks:
    """Checks on L(f)."""

    def test_farfield_planar(self):
        """n=2: the slope is exactly -alpha."""
        result = check_farfield(builtin_profile("bump", {"alpha": 0.5, "n": 2}), 2)
        assert result.status == "pass"
        assert result.measured == pytest.approx(0.5, rel=1e-6)
        assert result.band is not None

    def test_farfield_tolerance_override(self):
        """A tolerance below the o(1) term turns the check into a failure."""
        result = check_farfield(builtin_profile("bump", {"alpha": 0.5, "n": 3}), 3, tolerance=1e-12)
        assert result.status == "fail"

    def test_ball_average_mode(self):
        """Unknown modes are rejected before any work."""
        with pytest.raises(DomainError):
            check_ball_averages(builtin_profile("bump", {"alpha": 0.5, "n": 3}), 3, mode="annulus")

    def test_ball_average_parameter_range(self):
        """Proportional radii must lie in (0, 1)."""
        with pytest.raises(DomainError):
            check_ball_averages(builtin_profile("bump", {"alpha": 0.5, "n": 3}), 3, mode="proportional", parameter=1.5)

    def test_greens_scope_skips(self):
        """Odd n is skipped, not failed."""
        result = check_greens_property(builtin_profile("gaussian"), 3)
        assert result.skipped
        assert result.status == "skipped"


class TestMetricChecks:
    """Per-metric checks on a full analysis."""

    def test_flat_n4(self):
        """Flat R^4: alpha_0 = 0, tau = 1, nothing fails."""
        analysis = analyze_metric(ConformalMetric(4, builtin_profile("flat")))
        results = metric_checks(analysis)
        assert len(results) == 10
        assert [r.check_id for r in results if r.status != "pass"] == []
        tau = next(r for r in results if r.check_id == "tau_formula")
        assert tau.status == "pass"
        assert tau.predicted == pytest.approx(1.0)

    def test_scalar_spot(self):
        """R = 6 on the round S^3, R(0) = -24 for u = r^2."""
        sphere = ConformalMetric(3, builtin_profile("sphere"))
        assert check_scalar_spot(sphere, 6.0).status == "pass"
        assert check_scalar_spot(sphere, 7.0).status == "fail"
        monomial = ConformalMetric(3, builtin_profile("monomial", {"k": 1}))
        assert check_scalar_spot(monomial, -24.0, 0.0).status == "pass"

    @pytest.mark.slow
    def test_area_law(self):
        """Total Q of r^2 - log(1 + r^2) in n=3 is 4 pi^2."""
        result = check_area_law(1.0, 3)
        assert result.predicted == pytest.approx(4 * math.pi**2)
        assert result.status == "pass"


@pytest.mark.slow
class TestPotentialExponents:
    """Shell, line-integral and mass exponents of L(f) for a bump of mass 0.5 in n=3."""

    def test_shell_exponent(self, bump3):
        """Shell mass grows like R^{n-1-n alpha} = R^{0.5}."""
        f, potential = bump3
        result = check_shell_exponent(f, 3, potential=potential)
        assert result.predicted == pytest.approx(0.5, rel=1e-6)
        assert result.status == "pass"
        assert check_shell_exponent(f, 3, tolerance=1e-12, potential=potential).status == "fail"

    def test_line_integral(self, bump3):
        """int_i^{i+1} e^{L(f)} decays like i^{-alpha}."""
        f, potential = bump3
        result = check_line_integral(f, 3, potential=potential)
        assert result.predicted == pytest.approx(-0.5, rel=1e-6)
        assert result.status == "pass"
        assert check_line_integral(f, 3, tolerance=1e-12, potential=potential).status == "fail"

    def test_mass_bound(self, bump3):
        """int_{B_R} |L(f)| / (R^n log R) settles just above its head values."""
        f, potential = bump3
        result = check_mass_bound(f, 3, potential=potential)
        assert result.status == "pass"
        assert result.measured == pytest.approx(1.0, abs=0.05)
        # ratio(R_max) never drops to half the head maximum
        assert check_mass_bound(f, 3, tolerance=0.5, potential=potential).status == "fail"


class TestIncompleteness:
    """alpha > 1 forces a finite ray length."""

    def test_small_alpha_skipped(self):
        """alpha = 0.5 is outside the hypothesis."""
        result = check_incompleteness(density_from_params(3, {"alpha": 0.5}), 3)
        assert result.status == "skipped"
        assert "alpha > 1" in result.notes[0]

    @pytest.mark.slow
    def test_large_alpha(self):
        """alpha = 1.2: line exponent below -1 and the ray is incomplete."""
        result = check_incompleteness(density_from_params(3, {"alpha": 1.2}), 3)
        assert result.status == "pass"
        assert result.measured < -1.0

    @pytest.mark.slow
    def test_complete_ray_fails(self, monkeypatch):
        """A ray verdict of complete contradicts alpha > 1."""
        monkeypatch.setattr(
            verify, "ray_distance", lambda metric, radius: RayDistance(radius, radius, Completeness.COMPLETE, math.inf)
        )
        result = check_incompleteness(density_from_params(3, {"alpha": 1.2}), 3)
        assert result.status == "fail"
        assert "ray complete" in result.notes


class TestCohnVossen:
    """Complete normal metrics have alpha_0 <= 1."""

    def test_complete_normal_large_alpha_fails(self):
        """alpha_0 = 2 on a complete normal metric violates the bound."""
        result = check_cohn_vossen(_analysis(alpha0=2.0))
        assert result.status == "fail"
        assert result.measured == 2.0

    def test_small_alpha_passes(self):
        """alpha_0 = 0.5 is within the bound."""
        assert check_cohn_vossen(_analysis(alpha0=0.5)).status == "pass"

    def test_vacuous_cases(self):
        """Incomplete or non-normal metrics satisfy the bound vacuously, with a note."""
        incomplete = check_cohn_vossen(_analysis(alpha0=2.0, completeness=Completeness.INCOMPLETE))
        assert incomplete.status == "pass"
        assert any("incomplete" in note for note in incomplete.notes)
        non_normal = check_cohn_vossen(_analysis(alpha0=2.0, verdict=Verdict.NON_NORMAL))
        assert non_normal.status == "pass"
        assert any("not normal" in note for note in non_normal.notes)


class TestTauFormula:
    """tau = 1 - alpha_0 for complete normal metrics."""

    def test_match(self):
        """tau = 0.75 for alpha_0 = 0.25."""
        result = check_tau_formula(_analysis(alpha0=0.25, tau=0.75))
        assert result.status == "pass"
        assert result.predicted == pytest.approx(0.75)

    def test_mismatch(self):
        """tau = 0.5 for alpha_0 = 0.25 fails."""
        assert check_tau_formula(_analysis(alpha0=0.25, tau=0.5)).status == "fail"

    def test_skips(self):
        """Incomplete and non-normal metrics are outside the statement."""
        assert check_tau_formula(_analysis(completeness=Completeness.INCOMPLETE)).status == "skipped"
        assert check_tau_formula(_analysis(verdict=Verdict.NON_NORMAL)).status == "skipped"


class TestHTheorem:
    """h is an even integer in [0, n-1] when R_g is bounded below."""

    def test_even_integer(self):
        """h = 4.05 in n=5 snaps to 4."""
        result = check_h_theorem(_analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=4.05))
        assert result.status == "pass"
        assert result.notes[0] == "nearest even integer 4"

    def test_odd_value_fails(self):
        """h = 3 is a full unit away from any even integer."""
        assert check_h_theorem(_analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=3.0)).status == "fail"

    def test_above_range_fails(self):
        """h = 6 exceeds n - 1 = 4."""
        assert check_h_theorem(_analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=6.0)).status == "fail"

    def test_hypothesis_missing(self):
        """Unbounded-below R_g or an incomplete metric skips the check."""
        unbounded = check_h_theorem(_analysis(5, sign=ScalarSign.UNBOUNDED_BELOW, h=4.0))
        assert unbounded.status == "skipped"
        incomplete = check_h_theorem(_analysis(5, h=4.0, completeness=Completeness.INCOMPLETE))
        assert incomplete.notes == ("metric incomplete",)


class TestHDegree:
    """Snapped h equals deg P."""

    def test_match(self):
        """h = 4 and deg P = 4."""
        analysis = _analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=4.0, snapped=4, degree=4)
        assert check_h_degree(analysis).status == "pass"

    def test_mismatch(self):
        """h = 4 against deg P = 2 fails."""
        analysis = _analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=4.0, snapped=4, degree=2)
        assert check_h_degree(analysis).status == "fail"

    def test_unsnapped(self):
        """An h that did not snap cannot match any degree."""
        analysis = _analysis(5, sign=ScalarSign.BOUNDED_BELOW, h=3.0, snapped=None, degree=4)
        assert check_h_degree(analysis).status == "fail"


@pytest.mark.slow
class TestMonomialEntropy:
    """u = r^{2k}: h = deg P = 2k on the full analysis."""

    @pytest.mark.parametrize("k,n", [(1, 3), (2, 5)])
    def test_h_checks(self, k, n):
        """Both h checks pass and h measures 2k."""
        analysis = analyze_metric(ConformalMetric(n, builtin_profile("monomial", {"k": k})))
        theorem = check_h_theorem(analysis)
        assert theorem.status == "pass"
        assert theorem.measured == pytest.approx(2 * k, abs=0.15)
        assert check_h_degree(analysis).status == "pass"


class TestScalarConditional:
    """R_g >= 0 near infinity bounds tau."""

    def test_nonnegative(self):
        """Normal with tau = 1 satisfies tau <= 1."""
        assert check_scalar_conditional(_analysis(tau=1.0)).status == "pass"

    def test_tau_too_large(self):
        """tau = 1.5 fails."""
        assert check_scalar_conditional(_analysis(tau=1.5)).status == "fail"

    def test_non_normal_fails(self):
        """R_g >= 0 near infinity forces normality."""
        assert check_scalar_conditional(_analysis(verdict=Verdict.NON_NORMAL)).status == "fail"

    def test_bounded_away(self):
        """R_g >= C > 0 forces tau = 0."""
        passing = check_scalar_conditional(_analysis(tail=(6.0, 6.0), tau=0.0))
        assert passing.status == "pass"
        assert "tau <= 0.05" in passing.predicate
        assert check_scalar_conditional(_analysis(tail=(6.0, 6.0), tau=0.5)).status == "fail"

    def test_skips(self):
        """Incomplete metrics and bounded-below R_g are outside the statement."""
        incomplete = check_scalar_conditional(_analysis(completeness=Completeness.INCOMPLETE))
        assert incomplete.status == "skipped"
        assert incomplete.notes == ("metric incomplete",)
        assert check_scalar_conditional(_analysis(sign=ScalarSign.BOUNDED_BELOW)).status == "skipped"


class TestAlphaRange:
    """Range of alpha_0 under R_g >= 0 near infinity."""

    def test_complete(self):
        """Complete: 0 <= alpha_0 <= 1."""
        assert check_alpha_range(_analysis(alpha0=0.5)).status == "pass"
        assert check_alpha_range(_analysis(alpha0=1.5)).status == "fail"

    def test_incomplete(self):
        """Incomplete: only 0 <= alpha_0 <= 2."""
        assert check_alpha_range(_analysis(alpha0=1.5, completeness=Completeness.INCOMPLETE)).status == "pass"
        assert check_alpha_range(_analysis(alpha0=2.5, completeness=Completeness.INCOMPLETE)).status == "fail"

    def test_bounded_away(self):
        """R_g >= C > 0: alpha_0 >= 1, so alpha_0 = 1 when complete."""
        bounded = {"tail": (12.0, 12.0)}
        assert check_alpha_range(_analysis(alpha0=1.0, **bounded)).status == "pass"
        assert check_alpha_range(_analysis(alpha0=0.5, **bounded)).status == "fail"
        sphere_like = _analysis(alpha0=2.0, completeness=Completeness.INCOMPLETE, **bounded)
        assert check_alpha_range(sphere_like).status == "pass"

    def test_non_normal_skipped(self):
        """Non-normal metrics are skipped."""
        assert check_alpha_range(_analysis(verdict=Verdict.NON_NORMAL)).status == "skipped"


@pytest.mark.slow
class TestRoundSphere:
    """Per-metric checks on the round S^4."""

    def test_blowdown_limits(self, sphere4):
        """r^2 (-Delta) L -> 4, r^2 L'^2 -> 4, L / log r -> -2."""
        results = check_blowdown_limits(sphere4)
        assert [r.status for r in results] == ["pass", "pass", "pass"]
        assert results[0].measured == pytest.approx(4.0, rel=0.02)
        assert results[2].measured == pytest.approx(-2.0, abs=0.05)

    def test_blowdown_wrong_alpha(self, sphere4):
        """Predictions from a wrong alpha_0 fail the Laplacian and log limits."""
        curvature = replace(sphere4.curvature, total=replace(sphere4.curvature.total, alpha=1.0))
        results = check_blowdown_limits(replace(sphere4, curvature=curvature))
        assert results[0].status == "fail"
        assert results[2].status == "fail"

    def test_incomplete_statements(self, sphere4):
        """Cohn-Vossen holds vacuously; the complete-metric statements are skipped."""
        results = {r.check_id: r for r in metric_checks(sphere4)}
        assert results["cohn_vossen"].status == "pass"
        for check_id in ("tau_formula", "h_theorem", "h_degree", "scalar_conditional"):
            assert results[check_id].status == "skipped"
        assert results["scalar_conditional"].notes == ("metric incomplete",)

    def test_alpha_range(self, sphere4):
        """alpha_0 = 2 with R_g = 12 >= C > 0 on an incomplete metric."""
        result = check_alpha_range(sphere4)
        assert result.status == "pass"
        assert result.measured == pytest.approx(2.0, abs=1e-3)

    def test_scalar_limit(self, sphere4):
        """r^2 times the bending tends to 2 alpha_0 - alpha_0^2 = 0."""
        assert check_scalar_limit(sphere4).status == "pass"
        # the band over r in {1e2, 1e3} alone is wider than 1e-9
        assert check_scalar_limit(sphere4, tolerance=1e-9).status == "fail"


@pytest.mark.slow
class TestHalfLaplacianChecks:
    """Principal-value half-Laplacian of the Gaussian in n=3."""

    def test_oracle(self):
        """PV against the Fourier oracle."""
        f = builtin_profile("gaussian")
        assert check_halflap_oracle(f, 3).status == "pass"
        assert check_halflap_oracle(f, 3, tolerance=1e-14).status == "fail"

    def test_composition(self):
        """Applied twice it reproduces -Delta f."""
        f = builtin_profile("gaussian")
        assert check_halflap_composition(f, 3).status == "pass"
        assert check_halflap_composition(f, 3, tolerance=1e-14).status == "fail"


class TestRegistry:
    """Check registry and default matrix."""

    def test_lookup(self):
        """Names resolve to configs; unknown names to None."""
        assert get_check_by_name("farfield").name == "farfield"
        assert get_check_by_name("nope") is None

    def test_default_matrix_covers_registry(self):
        """Every registered check contributes its cases."""
        matrix = default_matrix()
        assert len(matrix) == sum(len(c.matrix) for c in CHECKS)
        assert {e.check for e in matrix} == set(CHECK_NAMES)

    def test_restricted(self):
        """Dimension and check selections intersect."""
        config = default_suite().restricted({2}, {"farfield"})
        assert [(e.check, e.n) for e in config.entries] == [("farfield", 2)]


class TestRunSuite:
    """In-process suite runs."""

    def test_order_and_progress(self):
        """Results follow matrix order and progress counts every entry."""
        config = SuiteConfig(
            [_spot(6.0), SuiteEntry("greens_property", 3, {"family": "gaussian"})], max_workers=1
        )
        seen = []
        suite = run_suite(config, progress_callback=lambda done, total: seen.append((done, total)))
        assert [r.status for r in suite.results] == ["pass", "skipped"]
        assert seen == [(1, 2), (2, 2)]
        assert suite.ok
        assert suite.entries == 2

    def test_failures_reported(self):
        """A wrong expectation fails the suite."""
        suite = run_suite(SuiteConfig([_spot(6.5)], max_workers=1))
        assert suite.failed == 1
        assert not suite.ok

    def test_tolerance_override(self):
        """Per-check tolerance overrides widen the band."""
        suite = run_suite(SuiteConfig([_spot(6.5)], {"scalar_spot": 1.0}, max_workers=1))
        assert suite.ok
        assert suite.tolerances == {"scalar_spot": 1.0}

    def test_non_integrable_density_is_a_failure(self):
        """A non-integrable density fails its entry instead of aborting the run."""
        suite = run_suite(SuiteConfig([SuiteEntry("area_law", 2, {"beta": 1.0})], max_workers=1))
        assert suite.failed == 1
        assert "FiniteTotalQViolated" in suite.results[0].notes[0]
        assert not suite.results[0].numerical
        assert suite.numerical_failures == 0

    def test_numerical_failure_marked(self, monkeypatch):
        """A quadrature failure inside a check is recorded as a numerical failure."""

        def failing(n, params, tolerances):
            raise QuadratureFailure("shell integral", 1.0, 0.5)

        monkeypatch.setattr(get_check_by_name("scalar_spot"), "run", failing)
        suite = run_suite(SuiteConfig([_spot(6.0)], max_workers=1))
        result = suite.results[0]
        assert result.status == "fail"
        assert result.numerical
        assert result.notes[0].startswith("QuadratureFailure")
        assert suite.numerical_failures == 1

    def test_unknown_check(self):
        """Unknown checks are rejected up front."""
        with pytest.raises(InvalidSpec):
            run_suite(SuiteConfig([SuiteEntry("nope", 3)], max_workers=1))
