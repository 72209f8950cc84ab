import sys
from pathlib import Path

import numpy as np
import pytest

# Add the backend directory to the Python path
backend_dir = Path(__file__).parent
sys.path.insert(0, str(backend_dir))

from services.catalog import ManifoldCatalog, projection_map

REPO_ROOT = backend_dir.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture
def catalog():
    return ManifoldCatalog()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sphere_model(catalog):
    return catalog.warped_product("sphere_model")


@pytest.fixture
def h3_model(catalog):
    return catalog.warped_product("h3_model")


@pytest.fixture
def sphere_pi1(sphere_model):
    return projection_map("pi1", sphere_model)


@pytest.fixture
def h3_pi1(h3_model):
    return projection_map("pi1", h3_model)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
