import numpy as np
import pytest

from scatterlab import (
    BoundaryCurve,
    ConstantCurvature,
    circle_points,
    ellipse_points,
)
from scatterlab.config import bump_chart


@pytest.fixture(scope="session")
def plane():
    return ConstantCurvature(0.0)


@pytest.fixture(scope="session")
def sphere():
    return ConstantCurvature(1.0)


@pytest.fixture(scope="session")
def hyperbolic():
    return ConstantCurvature(-1.0)


@pytest.fixture(scope="session")
def bump():
    # gentle positive-curvature bump at the origin, K(0) = 0.4 e^{-0.2}
    return bump_chart(0.1, 1.0)


@pytest.fixture(scope="session")
def unit_disk(plane):
    return BoundaryCurve(plane, circle_points(1.0), n_nodes=128, dense=2048)


@pytest.fixture(scope="session")
def ellipse21(plane):
    return BoundaryCurve(plane, ellipse_points(2.0, 1.0), n_nodes=256, dense=4096)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)
