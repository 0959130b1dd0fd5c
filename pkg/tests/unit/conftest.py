"""
Configuration for unit tests.
"""

from typing import List, Optional, Sequence

import numpy as np
import pytest

from coupled_mkv.model import InteractionSpec, ModelConfig, PolynomialSpec
from coupled_mkv.picard import DriftPair
from coupled_mkv.sde import Ensemble


class TestFactory:
    """
    Factory functions for creating test objects with minimal boilerplate.

    These factories create common test objects with default values,
    allowing tests to focus on the specific values that matter for that test.
    """

    @staticmethod
    def create_config(
        v1: Sequence[float] = (0.0, 0.0, -0.5, 0.0, 0.25),
        v2: Optional[Sequence[float]] = None,
        grad_f11: Sequence[float] = (0.0,),
        grad_f12: Sequence[float] = (0.0,),
        grad_f21: Sequence[float] = (0.0,),
        grad_f22: Sequence[float] = (0.0,),
        a: float = 0.5,
        sigma: float = 0.5,
    ) -> ModelConfig:
        """
        Create a ModelConfig from raw coefficient lists.

        Args:
            v1: Coefficients of V1, constant term first
            v2: Coefficients of V2, defaults to v1
            grad_f11: Coefficients of grad F11 (likewise for the other gradients)
            a: Population weight
            sigma: Noise amplitude

        Returns:
            ModelConfig instance
        """
        return ModelConfig(
            v1=PolynomialSpec(coeffs=tuple(v1)),
            v2=PolynomialSpec(coeffs=tuple(v1 if v2 is None else v2)),
            interactions=InteractionSpec(
                grad_f11=PolynomialSpec(coeffs=tuple(grad_f11)),
                grad_f12=PolynomialSpec(coeffs=tuple(grad_f12)),
                grad_f21=PolynomialSpec(coeffs=tuple(grad_f21)),
                grad_f22=PolynomialSpec(coeffs=tuple(grad_f22)),
            ),
            a=a,
            sigma=sigma,
        )

    @staticmethod
    def create_ensemble(
        x: Sequence[float] = (-1.0, 0.5, 2.0),
        y: Sequence[float] = (0.25, -0.75),
        sigma: float = 0.5,
        t: float = 0.0,
    ) -> Ensemble:
        """Create an Ensemble from explicit positions."""
        return Ensemble(x=np.array(x, dtype=float), y=np.array(y, dtype=float), sigma=sigma, t=t)

    @staticmethod
    def create_drift(
        components: List[Sequence[float]],
        horizon: float = 1.0,
        nodes: int = 11,
    ) -> DriftPair:
        """Create a time-independent DriftPair from four coefficient lists."""
        return DriftPair.constant(
            np.linspace(0.0, horizon, nodes),
            [PolynomialSpec(coeffs=tuple(c)) for c in components],
        )


@pytest.fixture
def test_factory() -> TestFactory:
    """
    Provides factory functions for creating common test objects.

    These factories reduce boilerplate in tests and ensure consistency
    in test object creation.
    """
    return TestFactory
