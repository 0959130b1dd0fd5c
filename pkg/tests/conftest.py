"""
Test configuration and fixtures for pytest.
"""

import contextlib
import os
from typing import Any, Dict

import pytest

from coupled_mkv.model import ModelConfig
from coupled_mkv.picard import MonteCarloParams
from coupled_mkv.sde import InitialLaw

# Summaries printed by CLI tests use the standard layout unless a test overrides it
os.environ["MKV_VERBOSITY"] = "standard"

DOUBLE_WELL = [0.0, 0.0, -0.5, 0.0, 0.25]
HARMONIC = [0.0, 0.0, 0.5]
ALPHA_TENTH = [[0.1, 0.1], [0.1, 0.1]]


def model_document(
    v: Any = None,
    alpha: Any = None,
    a: float = 0.5,
    sigma: float = 0.5,
) -> Dict[str, Any]:
    """A model document in the on-disk layout with equal potentials for both species."""
    potential = DOUBLE_WELL if v is None else v
    return {
        "v1": list(potential),
        "v2": list(potential),
        "interaction": {"quadratic": ALPHA_TENTH if alpha is None else alpha},
        "a": a,
        "sigma": sigma,
    }


@pytest.fixture
def resource_cleaner():
    """
    Provides an exit stack that ensures resources are properly closed after tests.

    Example usage:
        def test_pool(resource_cleaner):
            pool = resource_cleaner.enter_context(ThreadPoolExecutor(2))
    """
    with contextlib.ExitStack() as stack:
        yield stack


@pytest.fixture
def double_well_config() -> ModelConfig:
    """Symmetric double well x^4/4 - x^2/2 for both species, alpha = 0.1, a = 1/2, sigma = 0.3."""
    return ModelConfig.from_document(model_document(sigma=0.3))


@pytest.fixture
def quadratic_config() -> ModelConfig:
    """Harmonic confinement x^2/2 for both species, alpha = 0.1, a = 1/2, sigma = 0.5."""
    return ModelConfig.from_document(model_document(v=HARMONIC))


@pytest.fixture
def free_config() -> ModelConfig:
    """Double well without any interaction."""
    return ModelConfig.from_document(model_document(alpha=[[0.0, 0.0], [0.0, 0.0]]))


@pytest.fixture
def small_mc() -> MonteCarloParams:
    """A small particle budget for Gamma evaluations."""
    return MonteCarloParams(n_particles=200, dt=0.01, seed=7)


@pytest.fixture
def point_mc() -> MonteCarloParams:
    """Deterministic start: both species begin at x = 1."""
    return MonteCarloParams(
        n_particles=100,
        dt=0.01,
        seed=3,
        mu0=InitialLaw(kind="point", value=1.0),
        nu0=InitialLaw(kind="point", value=1.0),
    )


@pytest.fixture
def model_doc() -> Dict[str, Any]:
    """The double-well model document as loaded from disk."""
    return model_document()


@pytest.fixture
def make_model_document():
    """Builder for model documents, see ``model_document``."""
    return model_document
