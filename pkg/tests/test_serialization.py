import json

import numpy as np
import pytest

from scaresnet.errors import ValidationError
from scaresnet.tensor import (
    Tensor,
    load_checkpoint,
    load_tensor,
    read_meta,
    save_checkpoint,
    save_tensor,
)


def test_save_tensor_layout(tmp_path):
    t = Tensor(np.arange(6.0).reshape(1, 2, 3), dtype="float32")
    save_tensor(t, tmp_path / "t", extra_meta={"label": 1})
    meta = read_meta(tmp_path / "t")
    assert meta["shape"] == [1, 2, 3]
    assert meta["dtype"] == "float32"
    assert meta["layout"] == "CHW-rowmajor"
    assert meta["label"] == 1
    raw = (tmp_path / "t" / "data.bin").read_bytes()
    assert len(raw) == 6 * 4
    np.testing.assert_array_equal(np.frombuffer(raw, dtype="<f4"), np.arange(6.0))


def test_load_tensor_restores_values(tmp_path):
    t = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4)), dtype="float64")
    save_tensor(t, tmp_path / "t")
    loaded = load_tensor(tmp_path / "t")
    assert loaded.dtype == t.dtype
    np.testing.assert_array_equal(loaded.data, t.data)


def test_load_tensor_rejects_wrong_size(tmp_path):
    save_tensor(Tensor(np.ones((2, 2))), tmp_path / "t")
    (tmp_path / "t" / "data.bin").write_bytes(b"\x00" * 8)
    with pytest.raises(ValidationError):
        load_tensor(tmp_path / "t")


def test_load_tensor_rejects_unknown_layout(tmp_path):
    save_tensor(Tensor(np.ones(2)), tmp_path / "t")
    meta_path = tmp_path / "t" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["layout"] = "HWC"
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(ValidationError):
        load_tensor(tmp_path / "t")


def test_checkpoint_manifest(tmp_path):
    params = {
        "stem.weight": Tensor(np.ones((2, 3, 3, 3))),
        "head.bias": Tensor(np.zeros(1)),
    }
    save_checkpoint(params, tmp_path / "ckpt")
    manifest = json.loads((tmp_path / "ckpt" / "manifest.json").read_text())
    assert set(manifest["parameters"]) == set(params)
    loaded = load_checkpoint(tmp_path / "ckpt")
    for name, t in params.items():
        np.testing.assert_array_equal(loaded[name].data, t.data)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(ValidationError):
        load_checkpoint(tmp_path / "nothing")
