"""Structured key-value documents: metric specs and suite configs.

A document is a sequence of ``[section]`` headers and ``key = value`` lines. Values
are numbers, booleans (``true``/``false``), strings (bare or double-quoted) or arrays
``[a, b, c]`` of those. ``#`` starts a comment outside quotes. Keys before the first
header belong to the root section, which holds ``schema_version``.
"""

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from src.common.config import GRID_CONFIG, QUADRATURE_CONFIG
from src.qcurv.analysis import METRIC_FAMILIES, AnalysisToggles
from src.qcurv.errors import InvalidDimension, InvalidSpec
from src.qcurv.numerics import RadialGrid
from src.qcurv.profiles import get_family_by_name
from src.qcurv.verify import CHECK_NAMES, SuiteConfig, SuiteEntry, default_matrix

SCHEMA_VERSION = 1

Scalar = int | float | bool | str
Value = Scalar | list[Scalar]
Document = dict[str, dict[str, Value]]

_BARE = re.compile(r"^[A-Za-z0-9_.+\-/]+$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_.\- ]*)\]$")


# =============================================================================
# Documents
# =============================================================================


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def _parse_scalar(text: str) -> Scalar:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if not _BARE.match(text):
        raise ValueError(f"cannot parse value '{text}'")
    return text


def _split_array(inner: str) -> list[str]:
    """Split on commas outside double quotes."""
    parts, start, quoted = [], 0, False
    for i, ch in enumerate(inner):
        if ch == '"':
            quoted = not quoted
        elif ch == "," and not quoted:
            parts.append(inner[start:i])
            start = i + 1
    parts.append(inner[start:])
    return parts


def _parse_value(text: str) -> Value:
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError(f"unterminated array '{text}'")
        inner = text[1:-1].strip()
        return [_parse_scalar(part) for part in _split_array(inner)] if inner else []
    return _parse_scalar(text)


def parse_document(text: str) -> Document:
    """
    Parse a key-value document into sections.

    Raises:
        InvalidSpec: Every malformed line, duplicate key or duplicate section
    """
    sections: Document = {"": {}}
    current = ""
    violations = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        header = _SECTION.match(line)
        if header:
            current = header.group(1).strip()
            if current in sections:
                violations.append(f"line {number}: duplicate section [{current}]")
            sections.setdefault(current, {})
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not _KEY.match(key):
            violations.append(f"line {number}: expected 'key = value', got '{raw.strip()}'")
            continue
        if key in sections[current]:
            violations.append(f"line {number}: duplicate key '{key}'")
            continue
        try:
            sections[current][key] = _parse_value(value)
        except ValueError as e:
            violations.append(f"line {number}: {e}")
    if violations:
        raise InvalidSpec(violations)
    return sections


def format_scalar(value: Scalar, *, precise: bool = True) -> str:
    """Render a scalar; floats use repr when precise, else 12 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = repr(value) if precise else f"{value:.12g}"
        return text
    text = str(value)
    if _BARE.match(text) and _parse_scalar(text) == text:
        return text
    return '"' + text.replace('"', "'") + '"'


def format_value(value: Value, *, precise: bool = True) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_scalar(v, precise=precise) for v in value) + "]"
    return format_scalar(value, precise=precise)


def render_document(sections: Document, *, precise: bool = True) -> str:
    """Render sections; the root section comes first and empty sections keep their header."""
    lines = []
    for key, value in sections.get("", {}).items():
        lines.append(f"{key} = {format_value(value, precise=precise)}")
    for name, entries in sections.items():
        if name == "":
            continue
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        for key, value in entries.items():
            lines.append(f"{key} = {format_value(value, precise=precise)}")
    return "\n".join(lines) + "\n"


def _check_schema(doc: Document, violations: list[str]) -> None:
    version = doc.get("", {}).get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        violations.append(f"schema_version must be {SCHEMA_VERSION}, got {version}")
    unknown = set(doc.get("", {})) - {"schema_version"}
    violations.extend(f"unknown top-level key '{key}'" for key in sorted(unknown))


def _is_number(value: Value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value: Value) -> bool:
    return _is_number(value) and float(value) == int(value)


# =============================================================================
# Metric specs
# =============================================================================


@dataclass(frozen=True)
class MetricSpec:
    """
    What to analyze and how.

    Attributes:
        n: Dimension, >= 2
        family: Builtin family, "potential" or "sampled"
        params: Family parameters ("path" and "order" for sampled data)
        r_min, r_max, count: Geometric analysis grid, count >= 12
        tolerance: Absolute quadrature tolerance in (0, 1e-2]
        toggles: Analysis stages to run
    """

    n: int
    family: str
    params: dict[str, Scalar] = field(default_factory=dict)
    r_min: float = GRID_CONFIG.r_min
    r_max: float = GRID_CONFIG.r_max
    count: int = GRID_CONFIG.count
    tolerance: float = QUADRATURE_CONFIG.tolerance
    toggles: AnalysisToggles = field(default_factory=AnalysisToggles)

    def grid(self) -> RadialGrid:
        return RadialGrid.geometric(self.r_min, self.r_max, self.count)


_METRIC_SECTIONS = {"", "metric", "params", "grid", "quadrature", "analysis"}
_POTENTIAL_PARAMS = {"density": None, "alpha": "required", "quadratic": None}
_SAMPLED_PARAMS = {"path": "required", "order": None}


def _family_violations(family: str, params: dict[str, Scalar]) -> list[str]:
    if family == "potential":
        allowed = _POTENTIAL_PARAMS
    elif family == "sampled":
        allowed = _SAMPLED_PARAMS
    else:
        config = get_family_by_name(family)
        allowed = {key: "required" for key in config.required if key != "n" or family != "bump"}
        allowed.update({key: None for key in config.defaults})
        if family == "bump":
            allowed.setdefault("n", None)
    violations = [
        f"params.{key}: missing parameter '{key}' for family {family}"
        for key, need in allowed.items()
        if need and key not in params
    ]
    violations += [f"params.{key}: unknown parameter '{key}' for family {family}" for key in params if key not in allowed]
    for key, value in params.items():
        if key not in allowed:
            continue
        if key in ("density", "path"):
            if not isinstance(value, str):
                violations.append(f"params.{key}: expected a string")
        elif not _is_number(value):
            violations.append(f"params.{key}: expected a number, got {value!r}")
    if family == "potential" and params.get("density", "bump") not in ("bump", "sphere"):
        violations.append(f"params.density: must be bump or sphere, got {params['density']!r}")
    if family == "sampled" and params.get("order", 3) not in (1, 3, 5):
        violations.append(f"params.order: must be 1, 3 or 5, got {params['order']!r}")
    return violations


def parse_spec(text: str) -> MetricSpec:
    """
    Parse and validate a metric spec.

    Raises:
        InvalidDimension: n is the only problem and it is < 2 or not an integer
        InvalidSpec: Every violation found, each naming the offending key
    """
    doc = parse_document(text)
    violations: list[str] = []
    _check_schema(doc, violations)
    violations += [f"unknown section [{name}]" for name in doc if name not in _METRIC_SECTIONS]

    metric = doc.get("metric", {})
    violations += [f"metric.{key}: unknown key" for key in metric if key not in ("n", "family")]
    dimension_problem = None
    n = metric.get("n")
    if n is None:
        violations.append("metric.n: missing")
    elif not _is_integer(n) or int(n) < 2:
        dimension_problem = n
    family = metric.get("family")
    if family is None:
        violations.append("metric.family: missing")
    elif not isinstance(family, str) or family not in METRIC_FAMILIES:
        violations.append(f"metric.family: unknown family '{family}'")
        family = None

    params = dict(doc.get("params", {}))
    if family is not None:
        violations += _family_violations(family, params)

    grid = doc.get("grid", {})
    violations += [f"grid.{key}: unknown key" for key in grid if key not in ("r_min", "r_max", "count")]
    r_min = grid.get("r_min", GRID_CONFIG.r_min)
    r_max = grid.get("r_max", GRID_CONFIG.r_max)
    count = grid.get("count", GRID_CONFIG.count)
    if not _is_number(r_min) or r_min <= 0:
        violations.append(f"grid.r_min: must be a positive number, got {r_min!r}")
    if not _is_number(r_max) or (_is_number(r_min) and r_max <= r_min):
        violations.append(f"grid.r_max: must exceed r_min, got {r_max!r}")
    if not _is_integer(count) or count < 12:
        violations.append(f"grid.count: must be an integer >= 12, got {count!r}")

    quadrature = doc.get("quadrature", {})
    violations += [f"quadrature.{key}: unknown key" for key in quadrature if key != "tolerance"]
    tolerance = quadrature.get("tolerance", QUADRATURE_CONFIG.tolerance)
    if not _is_number(tolerance) or not 0 < tolerance <= 1e-2:
        violations.append(f"quadrature.tolerance: must be in (0, 1e-2], got {tolerance!r}")

    analysis = doc.get("analysis", {})
    toggles = {}
    for key, value in analysis.items():
        if key not in ("curvature", "entropy", "decomposition"):
            violations.append(f"analysis.{key}: unknown key")
        elif not isinstance(value, bool):
            violations.append(f"analysis.{key}: expected true or false")
        else:
            toggles[key] = value

    if dimension_problem is not None:
        if not violations:
            raise InvalidDimension(dimension_problem)
        violations.insert(0, f"metric.n: invalid dimension n={dimension_problem}: need an integer n >= 2")
    if violations:
        raise InvalidSpec(violations)
    return MetricSpec(
        n=int(n),
        family=family,
        params=params,
        r_min=float(r_min),
        r_max=float(r_max),
        count=int(count),
        tolerance=float(tolerance),
        toggles=AnalysisToggles(**toggles),
    )


def spec_document(spec: MetricSpec) -> Document:
    """Sections of a spec with every default filled in."""
    return {
        "": {"schema_version": SCHEMA_VERSION},
        "metric": {"n": spec.n, "family": spec.family},
        "params": dict(spec.params),
        "grid": {"r_min": spec.r_min, "r_max": spec.r_max, "count": spec.count},
        "quadrature": {"tolerance": spec.tolerance},
        "analysis": {
            "curvature": spec.toggles.curvature,
            "entropy": spec.toggles.entropy,
            "decomposition": spec.toggles.decomposition,
        },
    }


def render_spec(spec: MetricSpec) -> str:
    """Inverse of parse_spec."""
    return render_document(spec_document(spec))


def load_spec(path: str | Path) -> MetricSpec:
    """
    Read and parse a spec file; sampled-data paths resolve against the spec's directory.

    Raises:
        InvalidSpec: Unreadable file or invalid content
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidSpec(f"cannot read spec {path}: {e}") from e
    spec = parse_spec(text)
    table = spec.params.get("path")
    if spec.family == "sampled" and isinstance(table, str) and not Path(table).is_absolute():
        params = {**spec.params, "path": str(path.parent / table)}
        spec = MetricSpec(spec.n, spec.family, params, spec.r_min, spec.r_max, spec.count, spec.tolerance, spec.toggles)
    return spec


# =============================================================================
# Suite configs
# =============================================================================

_SUITE_KEYS = ("jobs", "dimensions", "checks", "default_matrix")


def parse_suite(text: str) -> SuiteConfig:
    """
    Parse a suite config.

    [suite] selects dimensions and checks, sets jobs and whether the default matrix is
    included; [tolerances] overrides per-check tolerances; each [entry.<label>] adds a
    case with check, n and flat parameters.

    Raises:
        InvalidSpec: Every violation found
    """
    doc = parse_document(text)
    violations: list[str] = []
    _check_schema(doc, violations)
    for name in doc:
        if name not in ("", "suite", "tolerances") and not name.startswith("entry."):
            violations.append(f"unknown section [{name}]")

    suite = doc.get("suite", {})
    violations += [f"suite.{key}: unknown key" for key in suite if key not in _SUITE_KEYS]
    jobs = suite.get("jobs", SuiteConfig([]).max_workers)
    if not _is_integer(jobs) or jobs < 1:
        violations.append(f"suite.jobs: must be a positive integer, got {jobs!r}")
    dimensions = suite.get("dimensions")
    if dimensions is not None and (
        not isinstance(dimensions, list) or not all(_is_integer(d) and d >= 2 for d in dimensions)
    ):
        violations.append(f"suite.dimensions: must be an array of integers >= 2, got {dimensions!r}")
    checks = suite.get("checks")
    if checks is not None:
        if not isinstance(checks, list):
            violations.append("suite.checks: must be an array of check names")
        else:
            violations += [f"suite.checks: unknown check '{c}'" for c in checks if c not in CHECK_NAMES]
    include_default = suite.get("default_matrix", True)
    if not isinstance(include_default, bool):
        violations.append("suite.default_matrix: expected true or false")

    tolerances = {}
    for key, value in doc.get("tolerances", {}).items():
        if not _is_number(value) or value <= 0:
            violations.append(f"tolerances.{key}: must be a positive number, got {value!r}")
        else:
            tolerances[key] = float(value)

    entries = list(default_matrix()) if include_default is True else []
    for name, section in doc.items():
        if not name.startswith("entry."):
            continue
        params = dict(section)
        check = params.pop("check", None)
        n = params.pop("n", None)
        if check not in CHECK_NAMES:
            violations.append(f"[{name}] check: unknown check {check!r}")
        if not _is_integer(n) or n < 2:
            violations.append(f"[{name}] n: invalid dimension {n!r}")
        if check in CHECK_NAMES and _is_integer(n) and n >= 2:
            entries.append(SuiteEntry(check, int(n), params))

    if violations:
        raise InvalidSpec(violations)
    config = SuiteConfig(entries, tolerances, int(jobs))
    return config.restricted(
        None if dimensions is None else {int(d) for d in dimensions},
        None if checks is None else set(checks),
    )


def load_suite(path: str | Path) -> SuiteConfig:
    """
    Read and parse a suite config file.

    Raises:
        InvalidSpec: Unreadable file or invalid content
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidSpec(f"cannot read suite config {path}: {e}") from e
    return parse_suite(text)
