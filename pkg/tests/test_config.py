from unittest.mock import patch

import pytest

from scaresnet.cli import parse_args
from scaresnet.config import (
    DEFAULT_DTYPE,
    DEFAULT_INTERPRETATION,
    DEFAULT_LEVELS,
    DEFAULT_PRESET,
    GRADCHECK_FLOOR,
    TRAIN_MOMENTUM,
    TRAIN_WEIGHT_DECAY,
)
from scaresnet.config.loader import load_config


def test_bundled_defaults():
    assert DEFAULT_PRESET == "mini"
    assert DEFAULT_INTERPRETATION == "literal"
    assert DEFAULT_LEVELS == (9, 6, 2, 11)
    assert TRAIN_MOMENTUM == 0.9
    assert TRAIN_WEIGHT_DECAY == 1e-4
    assert GRADCHECK_FLOOR == 1e-3


def test_dtype_default_reaches_train_demo():
    assert DEFAULT_DTYPE == "float32"
    args = parse_args(["train-demo", "--data", "d"])
    assert args.dtype == DEFAULT_DTYPE and args.ablation is False
    assert parse_args(["train-demo", "--data", "d", "--dtype", "float64"]).dtype == "float64"


def test_first_run_copies_defaults(tmp_path):
    config_dir = tmp_path / "scaresnet"
    with patch("scaresnet.config.loader._get_config_dir", return_value=config_dir):
        config = load_config()
    assert (config_dir / "model.toml").exists()
    assert config["model"]["levels"] == [9, 6, 2, 11]
    assert config["synthetic"]["size_min"] == 96


def test_user_file_overrides_defaults(tmp_path):
    config_dir = tmp_path / "scaresnet"
    config_dir.mkdir()
    (config_dir / "model.toml").write_text('[model]\ninterpretation = "swapped"\n')
    with patch("scaresnet.config.loader._get_config_dir", return_value=config_dir):
        config = load_config()
    assert config["model"]["interpretation"] == "swapped"
    assert config["model"]["heads"] == 4


def test_invalid_config_exits(tmp_path):
    """Ensure invalid TOML raises SystemExit."""
    config_dir = tmp_path / "scaresnet"
    config_dir.mkdir()
    (config_dir / "general.toml").write_text("invalid_toml = [")

    with patch("scaresnet.config.loader._get_config_dir", return_value=config_dir):
        with pytest.raises(SystemExit) as excinfo:
            load_config()
        assert excinfo.value.code == 1
