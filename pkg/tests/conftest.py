import numpy as np
import pytest

from qgyro.spin import ReferenceGeometry

SMALL_TWICE_ELL = (1, 2, 3, 4, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=SMALL_TWICE_ELL, ids=lambda t: f"2l={t}")
def small_geom(request):
    return ReferenceGeometry(request.param)
