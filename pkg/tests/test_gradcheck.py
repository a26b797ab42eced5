import numpy as np
import pytest

from scaresnet.errors import GradientError, ValidationError
from scaresnet.tensor import Tensor, finite_diff_grad, max_relative_error, sample_indices


def test_finite_diff_of_quadratic():
    x = Tensor(np.array([1.0, -2.0, 0.5]), dtype="float64")
    grad = finite_diff_grad(lambda t: float(np.sum(t.data**2)), x)
    np.testing.assert_allclose(grad.data, 2 * x.data, atol=1e-8)


def test_finite_diff_subset_leaves_others_zero():
    x = Tensor(np.arange(6.0).reshape(2, 3), dtype="float64")
    grad = finite_diff_grad(lambda t: float(np.sum(3.0 * t.data)), x, indices=[1, 4])
    np.testing.assert_allclose(grad.data.reshape(-1), [0, 3, 0, 0, 3, 0], atol=1e-8)


def test_finite_diff_non_finite_reports_index():
    x = Tensor(np.array([1.0, 0.0]), dtype="float64")

    def f(t):
        return float(np.log(t.data[1])) if t.data[1] < 0 else float(np.sum(t.data))

    with pytest.raises(GradientError) as excinfo:
        finite_diff_grad(f, x)
    assert excinfo.value.index == 1


def test_finite_diff_rejects_bad_eps():
    for eps in (0.0, -1e-5):
        with pytest.raises(ValidationError, match="eps must be positive"):
            finite_diff_grad(lambda t: 0.0, Tensor(np.ones(2)), eps=eps)


def test_max_relative_error_uses_floor():
    # tiny absolute differences on near-zero gradients are compared against the floor
    assert max_relative_error(np.array([1e-9]), np.array([2e-9])) == pytest.approx(1e-6)
    assert max_relative_error(np.array([2.0]), np.array([1.0])) == pytest.approx(0.5)
    assert max_relative_error(np.array([1.0, 5.0]), np.array([1.0, 0.0]), indices=[0]) == 0.0


def test_sample_indices_small_and_large():
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(sample_indices(5, 12, rng), np.arange(5))
    picked = sample_indices(1000, 12, rng)
    assert len(picked) == 12
    assert len(set(picked.tolist())) == 12
    assert np.all(np.diff(picked) > 0)
