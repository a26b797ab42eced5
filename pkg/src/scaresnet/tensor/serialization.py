"""On-disk tensor format: a directory with meta.json and data.bin."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np

from scaresnet.errors import ValidationError
from scaresnet.tensor.tensor import Tensor, resolve_dtype

logger = logging.getLogger(__name__)

LAYOUT_TAG = "CHW-rowmajor"
META_FILE = "meta.json"
DATA_FILE = "data.bin"
MANIFEST_FILE = "manifest.json"
CHECKPOINT_FORMAT = "scaresnet-checkpoint"

PathLike = Union[str, Path]


def tensor_meta(tensor: Tensor) -> Dict[str, Any]:
    return {
        "shape": list(tensor.shape),
        "dtype": tensor.dtype.value,
        "layout": LAYOUT_TAG,
    }


def save_tensor(
    tensor: Tensor,
    directory: PathLike,
    extra_meta: Mapping[str, Any] = None,
) -> Path:
    """Write ``tensor`` as little-endian row-major values plus its metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = tensor_meta(tensor)
    if extra_meta:
        meta.update(extra_meta)
    little = tensor.data.astype(tensor.data.dtype.newbyteorder("<"), copy=False)
    (directory / DATA_FILE).write_bytes(np.ascontiguousarray(little).tobytes(order="C"))
    (directory / META_FILE).write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return directory


def read_meta(directory: PathLike) -> Dict[str, Any]:
    path = Path(directory) / META_FILE
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read tensor metadata at {path}: {e}") from e


def load_tensor(directory: PathLike) -> Tensor:
    """Read a tensor written by ``save_tensor``."""
    directory = Path(directory)
    meta = read_meta(directory)
    if meta.get("layout") != LAYOUT_TAG:
        raise ValidationError(
            f"{directory}: unsupported layout {meta.get('layout')!r}, expected {LAYOUT_TAG}"
        )
    dtype = resolve_dtype(meta["dtype"]).numpy
    shape = tuple(int(n) for n in meta["shape"])
    raw = (directory / DATA_FILE).read_bytes()
    values = np.frombuffer(raw, dtype=dtype.newbyteorder("<"))
    if values.size != int(np.prod(shape)):
        raise ValidationError(
            f"{directory}: data.bin holds {values.size} values, shape {shape} needs {int(np.prod(shape))}"
        )
    return Tensor(values.astype(dtype).reshape(shape))


def save_checkpoint(params: Mapping[str, Tensor], directory: PathLike) -> Path:
    """Save named parameters under ``directory`` with a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, tensor in params.items():
        rel = Path("params") / name
        save_tensor(tensor, directory / rel)
        entries[name] = rel.as_posix()
    manifest = {"format": CHECKPOINT_FORMAT, "parameters": entries}
    (directory / MANIFEST_FILE).write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    logger.info(f"Saved {len(entries)} parameters to {directory}")
    return directory


def load_checkpoint(directory: PathLike) -> Dict[str, Tensor]:
    """Load the named parameters listed in a checkpoint manifest."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST_FILE).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read checkpoint manifest in {directory}: {e}") from e
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"{directory} is not a scaresnet checkpoint")
    return {
        name: load_tensor(directory / rel)
        for name, rel in manifest["parameters"].items()
    }
