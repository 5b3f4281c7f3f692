import pytest

from fbm_lab.simulator.covariance import ModelParams


@pytest.fixture
def rough():
    return ModelParams(H=0.3)


@pytest.fixture
def brownian():
    return ModelParams(H=0.5)


@pytest.fixture
def smooth():
    return ModelParams(H=0.7)
