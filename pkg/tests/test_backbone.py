import json
from dataclasses import replace

import numpy as np
import pytest

from scaresnet.errors import InputSizeError, ShapeError, ValidationError
from scaresnet.nn import (
    AttentionSettings,
    BackboneConfig,
    backbone_forward,
    build_scaresnet,
    check_input_size,
    minimum_input_size,
    preset_config,
    se_forward,
    shape_trace,
)
from scaresnet.tensor import Tensor, load_checkpoint, save_checkpoint


@pytest.fixture(scope="module")
def mini():
    return preset_config("mini")


@pytest.fixture(scope="module")
def mini_weights(mini):
    return build_scaresnet(mini, seed=0)


def _image(height, width, seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(0, 1, size=(3, height, width)), dtype="float32")


def test_same_seed_gives_identical_weights(mini):
    a = build_scaresnet(mini, seed=3).named_parameters()
    b = build_scaresnet(mini, seed=3).named_parameters()
    assert list(a) == list(b)
    for name in a:
        np.testing.assert_array_equal(a[name].data, b[name].data)


def test_different_seed_changes_weights(mini):
    a = build_scaresnet(mini, seed=3).stem.weight.data
    b = build_scaresnet(mini, seed=4).stem.weight.data
    assert not np.array_equal(a, b)


def test_mini_minimum_input(mini):
    assert mini.cumulative_stride == 8
    assert minimum_input_size(mini) == 72
    check_input_size(mini, 96, 96)
    with pytest.raises(InputSizeError) as e:
        check_input_size(mini, 64, 64)
    assert e.value.minimum == 72


def test_scaresnet50_preset_layout():
    config = preset_config("scaresnet-50")
    assert config.cumulative_stride == 32
    assert [s.blocks for s in config.stages] == [3, 4, 6, 3]
    assert config.cca_insert_after == (2,)
    assert config.spprcsp.in_channels == 2048
    assert minimum_input_size(config) == 288


def test_unknown_preset_rejected():
    with pytest.raises(ValidationError, match="unknown preset"):
        preset_config("resnet-9000")


def test_forward_unifies_sizes(mini, mini_weights):
    for height, width in [(96, 96), (120, 168), (256, 200)]:
        assert backbone_forward(_image(height, width), mini_weights, mini).shape == (64, 11, 11)


def test_forward_shape_constant_over_random_sizes(mini, mini_weights):
    rng = np.random.default_rng(99)
    shapes = {
        backbone_forward(_image(int(h), int(w), seed=i), mini_weights, mini).shape
        for i, (h, w) in enumerate(rng.integers(72, 161, size=(30, 2)))
    }
    assert shapes == {(64, 11, 11)}


def test_forward_rejects_small_input(mini, mini_weights):
    with pytest.raises(InputSizeError):
        backbone_forward(_image(64, 64), mini_weights, mini)


def test_forward_rejects_wrong_channels(mini, mini_weights):
    x = Tensor(np.zeros((1, 96, 96)), dtype="float32")
    with pytest.raises(ShapeError):
        backbone_forward(x, mini_weights, mini)


def test_zero_gamma_attention_is_removable(mini, mini_weights):
    x = _image(96, 104)
    with_cca = backbone_forward(x, mini_weights, mini)
    without = backbone_forward(x, mini_weights, replace(mini, cca_insert_after=()))
    np.testing.assert_array_equal(with_cca.data, without.data)


def test_identity_se_and_zero_gamma_attention_together(mini, randn):
    weights = build_scaresnet(mini, seed=2, dtype="float64").force_identity_se()
    for dse in (weights.spprcsp.dse_before, weights.spprcsp.dse_after):
        y = randn(dse.pointwise.shape[0], 6, 7)
        np.testing.assert_array_equal(se_forward(y, dse.se).data, y.data)
    x = _image(96, 104, seed=1).astype("float64")
    with_cca = backbone_forward(x, weights, mini)
    without = backbone_forward(x, weights, replace(mini, cca_insert_after=()))
    np.testing.assert_array_equal(with_cca.data, without.data)
    assert with_cca.shape == (64, 11, 11)


def test_backbone_without_spprcsp_keeps_last_stage_map(mini):
    plain = replace(mini, use_spprcsp=False)
    assert minimum_input_size(plain) < minimum_input_size(mini)
    assert plain.out_channels == 64 and plain.output_extent is None
    weights = build_scaresnet(plain, seed=0)
    assert weights.spprcsp is None
    assert not any(name.startswith("spprcsp.") for name in weights.named_parameters())
    assert backbone_forward(_image(96, 104), weights, plain).shape == (64, 12, 13)
    trace = shape_trace(plain, 96, 104)
    assert [r.layer for r in trace.rows] == ["stem", "stage0.block0", "cca@stage0", "stage1.block0"]
    assert BackboneConfig.from_dict(json.loads(json.dumps(plain.to_dict()))) == plain


def test_forward_without_spprcsp_weights_rejected(mini):
    weights = build_scaresnet(replace(mini, use_spprcsp=False), seed=0)
    with pytest.raises(ShapeError):
        backbone_forward(_image(96, 96), weights, mini)


def test_trace_matches_forward(mini, mini_weights):
    trace = shape_trace(mini, 96, 120)
    _, observed = backbone_forward(_image(96, 120), mini_weights, mini, trace=True)
    assert [(r.layer, r.input_shape, r.output_shape) for r in trace.rows] == observed
    assert trace.rows[-1].output_shape == (64, 11, 11)
    assert [r.layer for r in trace.rows] == [
        "stem",
        "stage0.block0",
        "cca@stage0",
        "stage1.block0",
        "spprcsp",
    ]


def test_multiple_attention_insertion_points(mini):
    config = replace(mini, cca_insert_after=(1, 0, 1))
    assert config.cca_insert_after == (0, 1)
    weights = build_scaresnet(config, seed=1)
    assert sorted(weights.cca) == ["stage0", "stage1"]
    assert backbone_forward(_image(72, 80), weights, config).shape == (64, 11, 11)


def test_invalid_insertion_point_names_layer(mini):
    with pytest.raises(ValidationError, match="cca@stage5"):
        replace(mini, cca_insert_after=(5,))
    with pytest.raises(ValidationError, match="cca@stage0"):
        replace(mini, cca=AttentionSettings(heads=3))


def test_spprcsp_channels_must_match_last_stage(mini):
    with pytest.raises(ValidationError, match="does not match"):
        replace(mini, spprcsp=replace(mini.spprcsp, in_channels=32))


def test_config_round_trips_through_json(mini):
    doc = json.loads(json.dumps(mini.to_dict()))
    assert BackboneConfig.from_dict(doc) == mini


def test_config_overrides_and_unknown_keys(mini):
    config = BackboneConfig.from_dict({"heads": 2, "c_out": 32}, base=mini)
    assert config.cca.heads == 2
    assert config.out_channels == 32
    with pytest.raises(ValidationError, match="unknown config keys"):
        BackboneConfig.from_dict({"depth": 50})
    with pytest.raises(ValidationError):
        BackboneConfig.from_dict({"levels": [4, 4, 2, 6]})


def test_checkpoint_round_trip(tmp_path, mini, mini_weights):
    save_checkpoint(mini_weights.named_parameters(), tmp_path / "ckpt")
    restored = build_scaresnet(mini, seed=7)
    restored.load_state(load_checkpoint(tmp_path / "ckpt"))
    x = _image(80, 88)
    np.testing.assert_array_equal(
        backbone_forward(x, restored, mini).data,
        backbone_forward(x, mini_weights, mini).data,
    )
