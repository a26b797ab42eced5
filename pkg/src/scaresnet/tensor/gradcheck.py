"""Central-difference gradient oracle."""

import logging
from typing import Callable, Iterable, Optional, Union

import numpy as np

from scaresnet.errors import GradientError, ValidationError
from scaresnet.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _scalar(value: Union[Tensor, float], index: int) -> float:
    result = value.item() if isinstance(value, Tensor) else float(value)
    if not np.isfinite(result):
        raise GradientError(
            f"non-finite function value while perturbing index {index}", index=index
        )
    return result


def finite_diff_grad(
    f: ScalarFn,
    x: Tensor,
    eps: float = 1e-5,
    indices: Optional[Iterable[int]] = None,
) -> Tensor:
    """Estimate df/dx entry by entry with central differences.

    Entry i is (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). ``indices``
    restricts the estimate to a subset of flat positions; the others are
    left at zero.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    base = x.data.reshape(-1)
    grad = np.zeros_like(base)
    positions = range(base.size) if indices is None else indices
    for i in positions:
        i = int(i)
        plus = base.copy()
        plus[i] += eps
        minus = base.copy()
        minus[i] -= eps
        f_plus = _scalar(f(Tensor(plus.reshape(x.shape))), i)
        f_minus = _scalar(f(Tensor(minus.reshape(x.shape))), i)
        grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return Tensor(grad.reshape(x.shape))


def max_relative_error(
    analytic: np.ndarray,
    numeric: np.ndarray,
    indices: Optional[Iterable[int]] = None,
    floor: float = 1e-3,
) -> float:
    """max |a - n| / max(|a|, |n|, floor) over the compared entries."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if indices is not None:
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        a, n = a[idx], n[idx]
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def sample_indices(size: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``count`` distinct flat positions (all of them for small tensors)."""
    if size <= count:
        return np.arange(size)
    return np.sort(rng.choice(size, size=count, replace=False))
