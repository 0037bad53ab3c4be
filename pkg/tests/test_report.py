"""Tests for the structured report renderer."""

from src.qcurv.report import Report, add_checks, suite_report
from src.qcurv.specfile import parse_document
from src.qcurv.verify import CheckResult, SuiteReport


def _results() -> list[CheckResult]:
    return [
        CheckResult("farfield", "bump n=3", 0.5, 0.5001, 0.02, True, band=(0.4999, 0.5003)),
        CheckResult("cohn_vossen", "sphere n=3", None, 2.0, 0.01, True, predicate="not (normal and complete)"),
        CheckResult("greens_property", "gaussian n=3", None, None, 0.0, True, skipped=True, notes=("n=3",)),
    ]


class TestReport:
    """Rendering and schema."""

    def test_schema_header(self):
        """Reports open with the schema version and command."""
        text = Report("verify").render()
        assert text.startswith("schema_version = 1\ncommand = verify\n")

    def test_checks_numbered(self):
        """Checks render in order with zero-padded keys and their anchors."""
        report = Report("analyze")
        add_checks(report, _results())
        doc = parse_document(report.render())
        assert list(k for k in doc if k.startswith("check.")) == ["check.001", "check.002", "check.003"]
        assert doc["check.001"]["band"] == [0.4999, 0.5003]
        assert doc["check.002"]["predicted"] == "not (normal and complete)"
        assert doc["check.003"]["status"] == "skipped"
        assert doc["check.003"]["measured"] == "none"
        assert doc["check.001"]["anchor"].startswith("L(f)(x)")

    def test_suite_summary(self):
        """Counts and tolerance overrides."""
        suite = SuiteReport(_results(), entries=3, duration=1.0, tolerances={"farfield": 0.05})
        doc = parse_document(suite_report(suite).render())
        assert doc["suite"] == {"entries": 3, "checks": 3, "passed": 2, "failed": 0, "skipped": 1}
        assert doc["tolerances"] == {"farfield": 0.05}
        assert doc["window"]["window_fraction"] == 0.4

    def test_byte_stable(self):
        """Rendering is deterministic and carries no timing."""
        first = suite_report(SuiteReport(_results(), 3, 1.0)).render()
        second = suite_report(SuiteReport(_results(), 3, 99.0)).render()
        assert first == second
