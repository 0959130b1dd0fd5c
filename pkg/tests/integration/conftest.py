"""
Pytest configuration and fixtures for integration tests.
"""

from typing import Any, Dict, List

import pytest

from coupled_mkv.invariant import MeanPair


class TestAssertions:
    """
    Collection of reusable assertion helpers for the numerical acceptance checks.

    These utilities keep the tolerance logic in one place and give better
    error messages when a check fails.
    """

    @staticmethod
    def assert_contains_mean(means: List[MeanPair], target: MeanPair, tol: float) -> None:
        """
        Assert that some mean pair lies within tol of target in the max norm.

        Raises:
            AssertionError: If no mean pair is close enough
        """
        closest = min(m.distance(target) for m in means)
        assert closest < tol, f"no root within {tol} of {target}, closest at {closest:.3g}"

    @staticmethod
    def assert_strictly_decreasing(values: List[float], label: str) -> None:
        """Assert that values decrease strictly from one entry to the next."""
        for k, (a, b) in enumerate(zip(values, values[1:])):
            assert b < a, f"{label} increases at position {k + 1}: {a:.6g} -> {b:.6g}"

    @staticmethod
    def assert_summary_ok(summary: Dict[str, Any], kind: str) -> None:
        """Assert the common shape of a run summary."""
        assert summary["kind"] == kind
        assert summary["status"] == "ok"
        assert "headline" in summary


@pytest.fixture
def test_assertions() -> TestAssertions:
    """
    Provides access to assertion helpers.

    Returns:
        TestAssertions class with assertion helper methods
    """
    return TestAssertions
