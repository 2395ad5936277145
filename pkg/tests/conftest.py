import numpy as np
import pytest

from fracbpx.config import get_settings
from fracbpx.models.schemas import MeshLevel
from fracbpx.services.logger import reset_run_logger
from fracbpx.services.mesh import build_hierarchy
from fracbpx.services.spectral import get_decomposition_cache, reset_decomposition_cache


@pytest.fixture(autouse=True)
def isolated_state(tmp_path, monkeypatch):
    """Fresh settings, run ledger and decomposition cache for every test."""
    monkeypatch.setenv("FRACBPX_LOGS_DIR", str(tmp_path / "logs"))
    get_settings.cache_clear()
    reset_run_logger()
    reset_decomposition_cache()
    yield
    get_settings.cache_clear()
    reset_run_logger()
    reset_decomposition_cache()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def level16():
    return MeshLevel(n_elements=16)


@pytest.fixture
def ops16(level16):
    return get_decomposition_cache().get(level16)


@pytest.fixture
def hierarchy16():
    return build_hierarchy(16, 3)
