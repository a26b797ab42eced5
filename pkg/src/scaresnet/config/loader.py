"""Configuration loading and merging logic."""

import sys
import shutil
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from importlib import resources
from pathlib import Path
from typing import Any, Dict

CONFIG_FILES = [
    "general.toml",
    "model.toml",
    "training.toml",
]


def _get_config_dir() -> Path:
    """Return the configuration directory path."""
    return Path.home() / ".config" / "scaresnet"


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> None:
    """Recursively merge ``update`` into ``base`` in place."""
    for k, v in update.items():
        if k in base and isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v)
        else:
            base[k] = v


def load_config() -> Dict[str, Any]:
    """Load configuration from TOML files, falling back to bundled defaults.

    Notices go to stderr: stdout belongs to the JSON output of the CLI.
    """
    config_dir = _get_config_dir()
    config_dir.mkdir(parents=True, exist_ok=True)

    final_config: Dict[str, Any] = {
        "general": {},
        "model": {},
        "training": {},
        "synthetic": {},
        "gradcheck": {},
    }

    # 1. Bundled defaults, copied to the user directory on first run
    for filename in CONFIG_FILES:
        try:
            resource_path = resources.files("scaresnet.data.config").joinpath(filename)
            user_file_path = config_dir / filename

            with resource_path.open("rb") as f:
                _merge(final_config, tomllib.load(f))

            if not user_file_path.exists():
                try:
                    with resources.as_file(resource_path) as source_path:
                        shutil.copy(source_path, user_file_path)
                    print(
                        f"Created default configuration {filename} at {user_file_path}",
                        file=sys.stderr,
                    )
                except OSError as e:
                    print(
                        f"Warning: Failed to create default config {filename}: {e}",
                        file=sys.stderr,
                    )
        except (OSError, tomllib.TOMLDecodeError) as e:
            print(
                f"Warning: Failed to load bundled config {filename}: {e}",
                file=sys.stderr,
            )

    # 2. User overrides
    for filename in CONFIG_FILES:
        user_file_path = config_dir / filename
        if not user_file_path.exists():
            continue
        try:
            with open(user_file_path, "rb") as f:
                _merge(final_config, tomllib.load(f))
        except tomllib.TOMLDecodeError as e:
            print(
                f"Error: Invalid configuration file at {user_file_path}",
                file=sys.stderr,
            )
            print(f"Details: {e}", file=sys.stderr)
            sys.exit(1)
        except OSError as e:
            print(
                f"Warning: Failed to load config from {user_file_path}: {e}",
                file=sys.stderr,
            )

    return final_config
