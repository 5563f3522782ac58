"""
Shared fixtures for powgame tests.
"""

import pytest

from powgame.controller import ControllerSpec
from powgame.game_core import ModelParams


@pytest.fixture
def base_params() -> ModelParams:
    """Two always-on and two strategic miners, effective difficulty 100."""
    return ModelParams(m=2, n=2, d=100.0)


@pytest.fixture
def case1_spec(base_params: ModelParams) -> ControllerSpec:
    """High-gain controller anchored just above the interior equilibrium."""
    return ControllerSpec(params=base_params, R_star=40.0, x_bar=0.26, K=56.8125, eps=0.005)


@pytest.fixture
def case2_spec(base_params: ModelParams) -> ControllerSpec:
    """Low-gain controller anchored at full participation."""
    return ControllerSpec(params=base_params, R_star=40.0, x_bar=1.0, K=10.1, eps=0.75)
