import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from scaresnet.tensor import DType, Tensor


@pytest.fixture(autouse=True)
def mock_settings_env_vars(tmp_path):
    """Point HOME at a temp dir so config bootstrap and log files stay isolated."""
    fake_home = tmp_path / "fake_home"
    fake_home.mkdir()

    with patch("pathlib.Path.home", return_value=fake_home):
        with patch.dict(os.environ, {"HOME": str(fake_home)}):
            yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def randn(rng):
    """Float64 tensor factory with standard-normal entries."""

    def make(*shape):
        return Tensor(rng.standard_normal(shape), dtype=DType.FLOAT64)

    return make
