import pytest

from src.utils.const import CAP_ENV_VAR


@pytest.fixture(autouse=True)
def default_cap(monkeypatch):
    monkeypatch.delenv(CAP_ENV_VAR, raising=False)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240613)
