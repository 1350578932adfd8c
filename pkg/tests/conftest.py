import numpy as np
import pytest

from localulam.fields import FunctionField
from localulam.geometry import Domain, build_grid

DWP_DOMAIN = Domain(-4.0, 4.0, -4.0, 4.0)


@pytest.fixture
def unit_domain():
    return Domain(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def dwp_grid():
    return build_grid(DWP_DOMAIN, 12)


@pytest.fixture
def still_field():
    """Zero velocity everywhere."""
    return FunctionField(lambda x, y, t: (np.zeros_like(x), np.zeros_like(y)))


def unit_vector(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
