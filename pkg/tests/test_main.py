"""Unit tests for main module."""

import logging

import pytest
from timebin_gates.main import (
    CHECKS,
    CheckResult,
    check_efficiency_threshold,
    check_gate_loss,
    check_qutrit_topology,
    check_timing,
    verify_reference,
)


class TestChecks:
    """Unit tests for the individual reproduction checks."""

    @pytest.mark.parametrize("check", CHECKS)
    def test_each_check_passes(self, check):
        """Should pass every check of the suite."""
        result = check()

        assert result.passed, f"{result.name}: {result.detail}"

    def test_gate_loss_detail(self):
        """Should report the 3 dB two-switch budget."""
        assert "total_db=3 " in check_gate_loss().detail

    def test_timing_detail(self):
        """Should report about 2.04 cm of path difference."""
        assert check_timing().detail.startswith("path_difference_m=0.0204")

    def test_topology_detail(self):
        """Should report three couplers and one swap."""
        assert check_qutrit_topology().detail == "couplers=3 swaps=1"

    def test_threshold_detail(self):
        """Should report eta = 2/(1 + sqrt 2)."""
        assert check_efficiency_threshold().detail.startswith("eta=0.8284271")


class TestVerifyReference:
    """Unit tests for verify_reference function."""

    def test_all_pass(self):
        """Should return one passing result per check, in order."""
        results = verify_reference()

        assert len(results) == len(CHECKS)
        assert all(result.passed for result in results)
        assert results[0].name == "reference-factorization"

    def test_raising_check_fails(self, caplog):
        """Should record a check that raises as a failure and keep going."""

        def check_broken_fixture():
            raise RuntimeError("boom")

        def check_fine():
            return CheckResult("fine", True, "")

        with caplog.at_level(logging.ERROR):
            results = verify_reference((check_broken_fixture, check_fine))

        assert [result.passed for result in results] == [False, True]
        assert results[0].name == "broken-fixture"
        assert results[0].detail == "error=boom"
        assert "check_broken_fixture raised: boom" in caplog.text

    def test_summary_logged(self, caplog):
        """Should log how many checks passed."""
        with caplog.at_level(logging.INFO):
            verify_reference((lambda: CheckResult("failing", False, "x"),))

        assert "0/1 checks passed" in caplog.text
