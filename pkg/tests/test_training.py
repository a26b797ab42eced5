from dataclasses import replace

import numpy as np
import pytest

from scaresnet.errors import InputSizeError, ValidationError
from scaresnet.nn import preset_config
from scaresnet.synthetic import gen_synthetic, load_dataset
from scaresnet.tensor import Tensor, load_checkpoint
from scaresnet.training import (
    ABLATION_VARIANTS,
    SGD,
    ablation_configs,
    train_ablation,
    train_demo,
)


@pytest.fixture
def dataset(tmp_path):
    return load_dataset(gen_synthetic(4, 72, 78, seed=21, out_dir=tmp_path / "data"))


def test_sgd_momentum_and_selective_decay():
    weight = Tensor(np.ones((2, 2)), dtype="float64")
    bias = Tensor(np.ones(2), dtype="float64")
    opt = SGD({"w": weight, "b": bias}, lr=0.1, momentum=0.5, weight_decay=0.1)
    grads = {"w": np.ones((2, 2)), "b": np.ones(2)}
    opt.step(grads)
    np.testing.assert_allclose(weight.data, 1 - 0.1 * 1.1)
    np.testing.assert_allclose(bias.data, 1 - 0.1 * 1.0)
    opt.step(grads)
    # v = 0.5 * 1.0 + 1.0 for the bias
    np.testing.assert_allclose(bias.data, 0.9 - 0.1 * 1.5)


def test_sgd_rejects_bad_hyperparameters():
    with pytest.raises(ValidationError):
        SGD({}, lr=-1.0)
    with pytest.raises(ValidationError):
        SGD({}, lr=0.1, momentum=1.0)


def test_training_is_deterministic(dataset):
    a = train_demo(dataset, steps=2, lr=0.01, seed=4, monitor_size=4)
    b = train_demo(dataset, steps=2, lr=0.01, seed=4, monitor_size=4)
    assert a.deterministic_dict() == b.deterministic_dict()
    assert len(a.losses) == 2
    assert "wall_clock_seconds" in a.to_dict()
    assert "wall_clock_seconds" not in a.deterministic_dict()


def test_zero_learning_rate_keeps_loss_constant(dataset):
    report = train_demo(dataset, steps=3, lr=0.0, seed=0, monitor_size=4)
    assert len(set(report.losses)) == 1
    assert report.final_loss == report.initial_loss


def test_positive_learning_rate_moves_loss(dataset):
    report = train_demo(dataset, steps=3, lr=0.05, seed=0, monitor_size=4)
    assert report.losses[-1] != report.initial_loss
    assert all(np.isfinite(report.losses))
    assert 0.0 <= report.final_accuracy <= 1.0


def test_step_callback_and_checkpoint(dataset, tmp_path):
    seen = []
    report = train_demo(
        dataset,
        steps=2,
        lr=0.01,
        monitor_size=4,
        checkpoint=tmp_path / "ckpt",
        on_step=lambda step, loss: seen.append((step, loss)),
    )
    assert seen == list(enumerate(report.losses))
    state = load_checkpoint(tmp_path / "ckpt")
    assert "head_weight" in state
    assert "backbone.stem.weight" in state
    assert report.config["steps"] == 2


def test_training_rejects_small_images(tmp_path):
    root = gen_synthetic(2, 40, 50, seed=0, out_dir=tmp_path / "small")
    with pytest.raises(InputSizeError):
        train_demo(root, steps=1)


def test_training_rejects_bad_step_count(dataset):
    with pytest.raises(ValidationError):
        train_demo(dataset, steps=0)


def test_summed_gradients_scale_with_batch(dataset):
    # two copies of one sample: batch 2 takes the same step as batch 1 with twice the lr
    pair = [dataset[0], dataset[0]]
    one = train_demo(pair, steps=1, lr=0.02, batch=1, momentum=0.0, weight_decay=0.0, monitor_size=2)
    two = train_demo(pair, steps=1, lr=0.01, batch=2, momentum=0.0, weight_decay=0.0, monitor_size=2)
    assert one.final_loss == pytest.approx(two.final_loss, rel=1e-4)


def test_float64_training_keeps_dtype(dataset, tmp_path):
    report = train_demo(dataset, steps=1, lr=0.01, dtype="float64", checkpoint=tmp_path / "ckpt")
    assert report.config["dtype"] == "float64"
    state = load_checkpoint(tmp_path / "ckpt")
    assert {t.data.dtype for t in state.values()} == {np.dtype(np.float64)}


def test_demo_learns_synthetic_lines(tmp_path):
    root = gen_synthetic(200, 96, 128, seed=0, out_dir=tmp_path / "data")
    report = train_demo(root, steps=200, seed=0)
    assert report.final_loss <= 0.5 * report.initial_loss
    assert report.final_accuracy >= 0.9


def test_ablation_configs_toggle_components():
    configs = ablation_configs(preset_config("mini"))
    assert tuple(configs) == ABLATION_VARIANTS
    assert (configs["baseline"].cca_insert_after, configs["baseline"].use_spprcsp) == ((), False)
    assert configs["cca"].cca_insert_after and not configs["cca"].use_spprcsp
    assert not configs["spprcsp"].cca_insert_after and configs["spprcsp"].use_spprcsp
    assert configs["full"] == preset_config("mini")


def test_ablation_restores_attention_from_preset():
    bare = ablation_configs(replace(preset_config("mini"), cca_insert_after=()))
    assert bare["full"].cca_insert_after == preset_config("mini").cca_insert_after


def test_ablation_trains_every_variant_from_one_seed(dataset, tmp_path):
    seen = []
    a = train_ablation(
        dataset, steps=2, lr=0.01, seed=3, monitor_size=4,
        checkpoint_dir=tmp_path / "ckpt", on_variant=seen.append,
    )
    b = train_ablation(dataset, steps=2, lr=0.01, seed=3, monitor_size=4)
    assert seen == list(ABLATION_VARIANTS)
    assert a.deterministic_dict() == b.deterministic_dict()
    rows = {row["variant"]: row for row in a.rows()}
    assert rows["baseline"]["parameters"] < rows["cca"]["parameters"] < rows["full"]["parameters"]
    assert rows["baseline"]["parameters"] < rows["spprcsp"]["parameters"] < rows["full"]["parameters"]
    assert a.to_dict()["variants"] == a.rows()
    for name in ABLATION_VARIANTS:
        assert "head_weight" in load_checkpoint(tmp_path / "ckpt" / name)


def test_ablation_subset_and_unknown_variant(dataset):
    report = train_ablation(dataset, steps=1, lr=0.0, variants=("baseline", "full"))
    assert list(report.reports) == ["baseline", "full"]
    with pytest.raises(ValidationError, match="unknown ablation variants"):
        train_ablation(dataset, steps=1, variants=("nope",))
