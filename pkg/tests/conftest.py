"""Test configuration and common fixtures."""

import os
from pathlib import Path

import pytest

# Run suites in-process and keep numerics quiet unless a test asks otherwise
os.environ.setdefault("MAX_WORKERS", "1")
os.environ.setdefault("LOG_LEVEL", "WARNING")


@pytest.fixture
def write_spec(tmp_path):
    """Write a spec or suite document into tmp_path and return its path."""

    def _write(text: str, name: str = "spec.txt") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def flat_spec_text():
    """Flat R^2 on a short grid."""
    return "[metric]\nn = 2\nfamily = flat\n[grid]\nr_min = 0.01\nr_max = 100.0\ncount = 25\n"
