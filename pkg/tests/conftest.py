import numpy as np
import pytest

from gradmap.measures import DiscreteMeasure
from gradmap.model_space import ModelSpace

ALL_MODELS = [ModelSpace("rp", 1), ModelSpace("rp", 2), ModelSpace("rp", 3),
              ModelSpace("cp", 1), ModelSpace("cp", 2)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=ALL_MODELS, ids=str)
def model(request):
    return request.param


@pytest.fixture
def rp1():
    return ModelSpace("rp", 1)


@pytest.fixture
def rp2():
    return ModelSpace("rp", 2)


@pytest.fixture
def cp1():
    return ModelSpace("cp", 1)


@pytest.fixture
def three_atom_rp1(rp1):
    return DiscreteMeasure.from_points(rp1, [[1, 1], [2, 1], [1, 3]])


@pytest.fixture
def boundary_rp1(rp1):
    """Half a vertex, half the midpoint: the orbit image is an open segment ending at 0."""
    return DiscreteMeasure.from_points(rp1, [[1, 0], [1, 1]])
