import pytest

from cospart import FilterSpec, NonidealityConfig


@pytest.fixture
def ideal_cfg():
    return NonidealityConfig.ideal()


@pytest.fixture
def brickwall():
    return FilterSpec(kind="brickwall", cutoff_f0=5000.0)
