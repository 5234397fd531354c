"""
Test Validation Suite
"""

import json

import pytest

from skg.cli import EXIT_OK, main
from skg.validation.suite import (
    CheckResult,
    _check,
    check_equivariance,
    check_fixed_point,
    check_tree_recursion,
    validate_suite,
)


@pytest.fixture(scope="module")
def fast_report():
    return validate_suite("fast", seed=0)


def test_fast_suite_passes(fast_report):
    failed = [c for c in fast_report.checks if not c.passed]
    assert not failed, failed
    assert fast_report.passed
    assert fast_report.level == "fast"


def test_fast_suite_check_names(fast_report):
    names = [c.name for c in fast_report.checks]
    assert names[:3] == ["kernel_ode_residual", "kernel_initial_conditions", "kernel_abel_identity"]
    assert "series_remainder_scaling" in names
    assert names[-1] == "odd_equivariance"
    assert len(names) == len(set(names))


def test_check_rejects_non_finite():
    assert not _check("nan", float("nan"), 1.0).passed
    assert _check("exact", 0.0, 0.0).passed
    assert not _check("over", 2.0, 1.0).passed


def test_cheap_checks_are_deterministic():
    assert check_fixed_point() == check_fixed_point()
    assert check_equivariance(7) == check_equivariance(7)
    assert check_tree_recursion(7) == check_tree_recursion(7)
    assert isinstance(check_fixed_point(), CheckResult)


def test_validate_command_writes_report(tmp_path):
    assert main(["validate", "--level", "fast", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["level"] == "fast"
    assert (tmp_path / "manifest.json").is_file()


@pytest.mark.slow
def test_full_suite_passes():
    report = validate_suite("full", seed=0)
    failed = [c for c in report.checks if not c.passed]
    assert not failed, failed
